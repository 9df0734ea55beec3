"""Inclusion geometry and its statistical diagnostics.

Spheres of unit radius are attached to the points of a sample; this
module rasterizes the resulting two-phase field and measures the
quantities that control the dilute expansion error: the minimal
lengthscale (sup-norm), per-point half nearest-neighbor separations
(Euclidean), the cluster partition of the fattened inclusion set, the
volume fraction, and the empirical second-order intensity.

Norm conventions differ on purpose: ``min_separation`` uses the sup
norm, ``rho_separations`` the Euclidean norm.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigError, DomainError
from .phases import PhaseModel
from .point_process import PointSample, TorusSpec

# two unit balls fattened by the unit ball overlap iff centers are closer than 4
CLUSTER_CUTOFF = 4.0
# singleton criterion: half nearest-neighbor distance at least 2
WELL_SEPARATED_RHO = 2.0

_GRID_MAGIC = "GRIDFIELD1"


@dataclass(frozen=True)
class InclusionSet:
    """Union of unit balls centered at the sample points."""

    sample: PointSample
    radius: float = 1.0

    def __post_init__(self):
        if self.radius != 1.0:
            raise ConfigError("inclusion radius is fixed at 1")


@dataclass(frozen=True)
class GridField:
    """Two-valued coefficient field on a regular periodic N^d grid.

    ``mask`` holds the phase index per cell (0 -> A1, 1 -> A2).
    """

    torus: TorusSpec
    N: int
    mask: np.ndarray = field(repr=False)
    phases: PhaseModel

    def __post_init__(self):
        if self.N < 64:
            raise ConfigError(f"grid resolution must be >= 64, got {self.N}")
        if self.h > 0.25 + 1e-12:
            raise ConfigError(
                f"cell size h={self.h} exceeds 1/4 (need >= 8 cells per diameter)")
        if self.mask.shape != (self.N,) * self.torus.d:
            raise ConfigError("mask shape does not match (N,)*d")
        if self.phases.d != self.torus.d:
            raise ConfigError("phase matrices have wrong dimension")

    @property
    def h(self):
        return self.torus.L / self.N

    def phi_raster(self):
        """Volume fraction by cell count; exact for the same raster rule."""
        return float(self.mask.mean())

    def dump(self, path):
        header = {
            "magic": _GRID_MAGIC, "d": self.torus.d, "N": self.N,
            "L": self.torus.L, "A1": self.phases.A1.tolist(),
            "A2": self.phases.A2.tolist(),
        }
        with open(path, "wb") as f:
            f.write((json.dumps(header) + "\n").encode())
            f.write(np.ascontiguousarray(self.mask, dtype=np.uint8).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            header = json.loads(f.readline().decode())
            if header.get("magic") != _GRID_MAGIC:
                raise ConfigError(f"{path}: not a grid-field dump")
            d, N = header["d"], header["N"]
            payload = f.read()
        mask = np.frombuffer(payload, dtype=np.uint8).reshape((N,) * d).copy()
        phases = PhaseModel(np.array(header["A1"]), np.array(header["A2"]))
        return cls(TorusSpec(d, header["L"]), N, mask, phases)


@dataclass
class GeometryReport:
    """Per-sample geometric diagnostics."""

    n_points: int
    ell_hat: float                    # min sup-norm pair distance
    rho: np.ndarray                   # half nearest-neighbor Euclidean distance
    clusters: list                    # partition of point indices
    phi_hat: float
    lambda2_hat: float | None = None  # needs an ensemble; None for one sample

    @property
    def well_separated(self):
        return self.rho >= WELL_SEPARATED_RHO

    @property
    def n_singletons(self):
        return sum(1 for c in self.clusters if len(c) == 1)

    def to_text(self):
        lines = [
            f"n_points {self.n_points}",
            f"ell_hat {self.ell_hat:.17g}",
            f"rho_min {min(self.rho, default=math.inf):.17g}",
            f"n_clusters {len(self.clusters)}",
            f"n_singletons {self.n_singletons}",
            f"n_well_separated {int(self.well_separated.sum())}",
            f"phi_hat {self.phi_hat:.17g}",
            f"lambda2_hat {'unknown' if self.lambda2_hat is None else repr(self.lambda2_hat)}",
        ]
        return "\n".join(lines) + "\n"

    CSV_COLUMNS = ("n_points", "ell_hat", "rho_min", "n_clusters",
                   "n_singletons", "phi_hat")

    def to_csv_row(self):
        rho_min = float(self.rho.min()) if len(self.rho) else math.inf
        return (f"{self.n_points},{self.ell_hat:.17g},{rho_min:.17g},"
                f"{len(self.clusters)},{self.n_singletons},{self.phi_hat:.17g}")


def min_separation(sample):
    """Minimal sup-norm pairwise torus distance; +inf below 2 points."""
    if len(sample) < 2:
        return math.inf
    sup, _ = backend.pairwise_stats(sample.centers, sample.torus.L)
    return sup


def rho_separations(sample):
    """Half the Euclidean torus distance to the nearest other point, per point."""
    if len(sample) < 2:
        return np.full(len(sample), math.inf)
    _, nn = backend.pairwise_stats(sample.centers, sample.torus.L)
    return nn / 2.0


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def cluster_decomposition(sample):
    """Connected components of the fattened inclusion set, as index lists.

    Two inclusions merge iff their centers are strictly closer than 4
    (open overlap of the radius-2 fattened balls). Singletons coincide
    with the well-separated set {n : rho_n >= 2}.
    """
    n = len(sample)
    uf = _UnionFind(n)
    if n >= 2:
        for i, j in backend.close_pairs(sample.centers, sample.torus.L, CLUSTER_CUTOFF):
            uf.union(int(i), int(j))
    groups = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def volume_fraction(inclusions, method="raster", N=None, M=None, seed=0):
    """Volume fraction of the inclusion union, by raster or Monte Carlo."""
    sample = inclusions.sample
    L, d = sample.torus.L, sample.torus.d
    if len(sample) == 0:
        return 0.0
    if method == "raster":
        if N is None:
            raise ConfigError("raster method needs N")
        mask = backend.raster_mask(sample.centers, L, int(N), d)
        return float(mask.mean())
    if method == "montecarlo":
        if M is None:
            raise ConfigError("montecarlo method needs M")
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 17]))
        probes = rng.uniform(0.0, L, size=(int(M), d))
        inside = backend.points_in_union(probes, sample.centers, L)
        return float(inside.mean())
    raise ConfigError(f"unknown volume_fraction method {method!r}")


def rasterize(inclusions, phases, N):
    """Two-valued coefficient field: cell gets A2 iff its center is in an inclusion."""
    sample = inclusions.sample
    N = int(N)
    if sample.torus.L / N > 0.25 + 1e-12:
        raise ConfigError(
            f"cell size h={sample.torus.L / N} exceeds 1/4 at N={N}")
    mask = backend.raster_mask(sample.centers, sample.torus.L, N, sample.torus.d)
    return GridField(sample.torus, N, mask, phases)


@dataclass
class Lambda2Estimate:
    value: float
    bin_width: float
    rmax: float
    at_cutoff: bool            # maximizing bin touches the cutoff shell
    lambda_hat: float          # empirical intensity of the ensemble
    bound_violated: bool       # value > lambda_hat beyond 3 sigma


def estimate_lambda2(samples, ell=None, bin_width=None, rmax=None):
    """Empirical second-order intensity from an ensemble of samples.

    Ordered pair displacements are binned into cubes of side ``ell`` (or
    ``bin_width`` for processes with vanishing minimal lengthscale); the
    estimate is the maximal bin count normalized by (ensemble size * L^d
    * side^d), over bins within ``rmax`` (default L/4).
    """
    samples = list(samples)
    if not samples:
        raise DomainError("estimate_lambda2 needs a non-empty ensemble")
    torus = samples[0].torus
    width = ell if (ell is not None and ell > 0) else bin_width
    if width is None or width <= 0:
        raise ConfigError("need a positive contact scale ell or a bin_width")
    if rmax is None:
        rmax = torus.L / 4
    nb = 2 * max(1, int(math.floor(rmax / width)))
    hist = np.zeros((nb,) * torus.d, dtype=np.int64)
    n_total = 0
    for s in samples:
        if s.torus != torus:
            raise ConfigError("ensemble mixes torus specs")
        backend.pair_disp_hist(s.centers, torus.L, width, rmax, hist)
        n_total += len(s)
    m = len(samples)
    value = float(hist.max()) / (m * torus.volume * width ** torus.d)
    argmax = np.unravel_index(int(hist.argmax()), hist.shape)
    at_cutoff = any(i == 0 or i == nb - 1 for i in argmax)
    if at_cutoff:
        warnings.warn("lambda2 estimate: maximizing bin sits at the cutoff radius")
    lambda_hat = n_total / (m * torus.volume)
    # binomial 3-sigma slack on the maximal bin count
    cmax = float(hist.max())
    slack = 3.0 * math.sqrt(max(cmax, 1.0)) / (m * torus.volume * width ** torus.d)
    bound_violated = value > lambda_hat + slack
    if bound_violated:
        warnings.warn("lambda2 estimate exceeds the empirical intensity bound")
    return Lambda2Estimate(value, width, rmax, at_cutoff, lambda_hat, bound_violated)


def geometry_report(sample, raster_N=None, lambda2=None):
    """Assemble the per-sample diagnostics in one pass."""
    incl = InclusionSet(sample)
    if raster_N is None:
        raster_N = max(64, 4 * int(sample.torus.L))
    phi = volume_fraction(incl, method="raster", N=raster_N)
    return GeometryReport(
        n_points=len(sample),
        ell_hat=min_separation(sample),
        rho=rho_separations(sample),
        clusters=cluster_decomposition(sample),
        phi_hat=phi,
        lambda2_hat=lambda2,
    )
