"""Shared fixtures: a mixed corpus of point samples and small helpers."""

import numpy as np
import pytest

from dilute_homog import (TorusSpec, sample_jittered_lattice, sample_matern2,
                          sample_poisson)


def brute_force_clusters(sample, cutoff=4.0):
    """Independent cluster oracle: connected components of the distance graph."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    n = len(sample)
    if n == 0:
        return []
    c = sample.centers
    L = sample.torus.L
    diff = c[:, None, :] - c[None, :, :]
    diff -= L * np.round(diff / L)
    d2 = (diff ** 2).sum(axis=2)
    adj = csr_matrix((d2 < cutoff * cutoff).astype(np.int8))
    ncomp, labels = connected_components(adj, directed=False)
    groups = [[] for _ in range(ncomp)]
    for i, q in enumerate(labels):
        groups[q].append(i)
    return sorted(groups, key=lambda g: g[0])


@pytest.fixture(scope="session")
def sample_corpus():
    """Mixed ensemble used for exhaustive geometric property checks."""
    corpus = []
    t2 = TorusSpec(2, 64.0)
    t3 = TorusSpec(3, 16.0)
    for seed in range(40):
        corpus.append(sample_poisson(0.01, t2, seed))
    for seed in range(30):
        corpus.append(sample_poisson(0.05, t2, 100 + seed))
    for seed in range(20):
        corpus.append(sample_matern2(0.05, 2.5, t2, 200 + seed))
    for seed in range(10):
        corpus.append(sample_matern2(0.1, 4.2, t2, 300 + seed))
    for seed in range(10):
        corpus.append(sample_poisson(0.01, t3, 400 + seed))
    for seed in range(5):
        corpus.append(sample_jittered_lattice(8.0, 1.0, t2, 500 + seed))
    return corpus
