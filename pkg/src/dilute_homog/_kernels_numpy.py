"""Pure-numpy reference kernels.

Every function here has a numba twin in ``_kernels_numba``; the backend
module picks one of the two at import time. These versions are kept
vectorized but allocation-heavy, and double as the ground truth for the
kernel benchmark.
"""

import numpy as np


def raster_mask(centers, L, N, d):
    """Phase-index mask: 1 where the cell center lies in a periodic unit ball."""
    h = L / N
    mask = np.zeros((N,) * d, dtype=np.uint8)
    if len(centers) == 0:
        return mask
    axes = [(np.arange(N) + 0.5) * h for _ in range(d)]
    for c in centers:
        # window of cells that can possibly be inside the ball
        idx = []
        for j in range(d):
            lo = int(np.floor((c[j] - 1.0) / h)) - 1
            hi = int(np.ceil((c[j] + 1.0) / h)) + 1
            idx.append(np.arange(lo, hi + 1) % N)
        grids = np.meshgrid(*[axes[j][idx[j]] for j in range(d)], indexing="ij")
        r2 = np.zeros(grids[0].shape)
        for j in range(d):
            dx = grids[j] - c[j]
            dx -= L * np.round(dx / L)
            r2 += dx * dx
        sub = mask[np.ix_(*idx)]
        sub[r2 < 1.0] = 1
        mask[np.ix_(*idx)] = sub
    return mask


def _min_image(diff, L):
    return diff - L * np.round(diff / L)


def pairwise_stats(centers, L):
    """(min sup-norm pair distance, per-point nearest-neighbor Euclidean distance)."""
    n = len(centers)
    if n < 2:
        return np.inf, np.full(n, np.inf)
    diff = _min_image(centers[:, None, :] - centers[None, :, :], L)
    sup = np.abs(diff).max(axis=2)
    euc = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(sup, np.inf)
    np.fill_diagonal(euc, np.inf)
    return float(sup.min()), euc.min(axis=1)


def close_pairs(centers, L, cutoff):
    """Index pairs (i, j), i < j, with Euclidean torus distance < cutoff."""
    n = len(centers)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    diff = _min_image(centers[:, None, :] - centers[None, :, :], L)
    d2 = (diff ** 2).sum(axis=2)
    ii, jj = np.where(d2 < cutoff * cutoff)
    keep = ii < jj
    return np.stack([ii[keep], jj[keep]], axis=1)


def pair_disp_hist(centers, L, width, rmax, hist):
    """Accumulate ordered pair displacements into a cubic histogram.

    ``hist`` has shape (nb,)*d with nb = 2*ceil(rmax/width); bin b covers
    displacements in [(b - nb/2)*width, (b - nb/2 + 1)*width) per component.
    """
    n, d = centers.shape
    nb = hist.shape[0]
    if n < 2:
        return
    diff = _min_image(centers[:, None, :] - centers[None, :, :], L)
    mask = ~np.eye(n, dtype=bool)
    disp = diff[mask]
    bins = np.floor(disp / width).astype(np.int64) + nb // 2
    ok = np.all((bins >= 0) & (bins < nb), axis=1)
    bins = bins[ok]
    flat = np.zeros(hist.size, dtype=np.int64)
    lin = np.ravel_multi_index(tuple(bins[:, j] for j in range(d)), hist.shape)
    np.add.at(flat, lin, 1)
    hist += flat.reshape(hist.shape)


def points_in_union(points, centers, L):
    """Boolean mask: probe point lies inside some periodic unit ball."""
    if len(centers) == 0:
        return np.zeros(len(points), dtype=bool)
    out = np.zeros(len(points), dtype=bool)
    # chunk over probes to bound the (probes x centers) intermediate
    step = max(1, 10_000_000 // max(1, len(centers)))
    for s in range(0, len(points), step):
        diff = _min_image(points[s:s + step, None, :] - centers[None, :, :], L)
        d2 = (diff ** 2).sum(axis=2)
        out[s:s + step] = (d2 < 1.0).any(axis=1)
    return out


def matern_keep(points, marks, r_hard, L):
    """Matern II thinning: keep a point iff no neighbor within r_hard has an older mark."""
    n = len(points)
    keep = np.ones(n, dtype=bool)
    if n < 2:
        return keep
    diff = _min_image(points[:, None, :] - points[None, :, :], L)
    d2 = (diff ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    conflict = d2 < r_hard * r_hard
    older = marks[None, :] < marks[:, None]
    keep = ~(conflict & older).any(axis=1)
    return keep


def flux_divergence(p, e, mask, A1, A2, h):
    """div(A (grad p + e)) with forward-difference gradient, backward divergence.

    ``p`` may be None (treated as zero). ``mask`` selects phase 2 cells.
    """
    d = mask.ndim
    dA = A2 - A1
    m = mask.astype(np.float64)
    g = []
    for j in range(d):
        gj = np.full(mask.shape, e[j], dtype=np.float64)
        if p is not None:
            gj += (np.roll(p, -1, axis=j) - p) / h
        g.append(gj)
    div = np.zeros(mask.shape)
    for i in range(d):
        fi = A1[i, 0] * g[0]
        for j in range(1, d):
            fi += A1[i, j] * g[j]
        corr = dA[i, 0] * g[0]
        for j in range(1, d):
            corr += dA[i, j] * g[j]
        fi += m * corr
        div += (fi - np.roll(fi, 1, axis=i)) / h
    return div


def gradient_field(p, e, h):
    """g = grad p + e as an array of shape (d,) + grid."""
    d = p.ndim
    g = np.empty((d,) + p.shape)
    for j in range(d):
        g[j] = (np.roll(p, -1, axis=j) - p) / h + e[j]
    return g


def flux_field(g, mask, A1, A2):
    """A g per cell, shape (d,) + grid."""
    d = mask.ndim
    dA = A2 - A1
    m = mask.astype(np.float64)
    f = np.empty_like(g)
    for i in range(d):
        fi = A1[i, 0] * g[0]
        ci = dA[i, 0] * g[0]
        for j in range(1, d):
            fi += A1[i, j] * g[j]
            ci += dA[i, j] * g[j]
        f[i] = fi + m * ci
    return f
