"""Numba-compiled hot kernels, mirroring ``_kernels_numpy``.

All kernels are single-threaded on purpose: determinism across worker
counts is guaranteed by parallelizing over ensemble members, never inside
a kernel.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _wrap(x, L):
    return x - L * np.round(x / L)


@njit(cache=True)
def _raster_mask_2d(centers, L, N):
    h = L / N
    mask = np.zeros((N, N), dtype=np.uint8)
    for c in range(centers.shape[0]):
        cx, cy = centers[c, 0], centers[c, 1]
        ilo = int(np.floor((cx - 1.0) / h)) - 1
        ihi = int(np.ceil((cx + 1.0) / h)) + 1
        jlo = int(np.floor((cy - 1.0) / h)) - 1
        jhi = int(np.ceil((cy + 1.0) / h)) + 1
        for i in range(ilo, ihi + 1):
            x = (i + 0.5) * h - cx
            x -= L * np.round(x / L)
            for j in range(jlo, jhi + 1):
                y = (j + 0.5) * h - cy
                y -= L * np.round(y / L)
                if x * x + y * y < 1.0:
                    mask[i % N, j % N] = 1
    return mask


@njit(cache=True)
def _raster_mask_3d(centers, L, N):
    h = L / N
    mask = np.zeros((N, N, N), dtype=np.uint8)
    for c in range(centers.shape[0]):
        lo = np.empty(3, dtype=np.int64)
        hi = np.empty(3, dtype=np.int64)
        for k in range(3):
            lo[k] = int(np.floor((centers[c, k] - 1.0) / h)) - 1
            hi[k] = int(np.ceil((centers[c, k] + 1.0) / h)) + 1
        for i in range(lo[0], hi[0] + 1):
            x = (i + 0.5) * h - centers[c, 0]
            x -= L * np.round(x / L)
            for j in range(lo[1], hi[1] + 1):
                y = (j + 0.5) * h - centers[c, 1]
                y -= L * np.round(y / L)
                for k in range(lo[2], hi[2] + 1):
                    z = (k + 0.5) * h - centers[c, 2]
                    z -= L * np.round(z / L)
                    if x * x + y * y + z * z < 1.0:
                        mask[i % N, j % N, k % N] = 1
    return mask


def raster_mask(centers, L, N, d):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if d == 2:
        return _raster_mask_2d(centers, L, N)
    return _raster_mask_3d(centers, L, N)


@njit(cache=True)
def _pairwise_stats(centers, L):
    n, d = centers.shape
    nn = np.full(n, np.inf)
    min_sup = np.inf
    for i in range(n):
        for j in range(i + 1, n):
            sup = 0.0
            d2 = 0.0
            for k in range(d):
                dx = centers[i, k] - centers[j, k]
                dx -= L * np.round(dx / L)
                a = abs(dx)
                if a > sup:
                    sup = a
                d2 += dx * dx
            if sup < min_sup:
                min_sup = sup
            dist = np.sqrt(d2)
            if dist < nn[i]:
                nn[i] = dist
            if dist < nn[j]:
                nn[j] = dist
    return min_sup, nn


def pairwise_stats(centers, L):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if len(centers) < 2:
        return np.inf, np.full(len(centers), np.inf)
    s, nn = _pairwise_stats(centers, L)
    return float(s), nn


@njit(cache=True)
def _close_pairs(centers, L, cutoff):
    n, d = centers.shape
    out = []
    c2 = cutoff * cutoff
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for k in range(d):
                dx = centers[i, k] - centers[j, k]
                dx -= L * np.round(dx / L)
                d2 += dx * dx
            if d2 < c2:
                out.append((i, j))
    res = np.empty((len(out), 2), dtype=np.int64)
    for m, (i, j) in enumerate(out):
        res[m, 0] = i
        res[m, 1] = j
    return res


def close_pairs(centers, L, cutoff):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if len(centers) < 2:
        return np.empty((0, 2), dtype=np.int64)
    return _close_pairs(centers, L, cutoff)


@njit(cache=True)
def _pair_disp_hist_2d(centers, L, width, hist):
    n = centers.shape[0]
    nb = hist.shape[0]
    half = nb // 2
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = centers[j, 0] - centers[i, 0]
            dx -= L * np.round(dx / L)
            dy = centers[j, 1] - centers[i, 1]
            dy -= L * np.round(dy / L)
            bx = int(np.floor(dx / width)) + half
            by = int(np.floor(dy / width)) + half
            if 0 <= bx < nb and 0 <= by < nb:
                hist[bx, by] += 1


@njit(cache=True)
def _pair_disp_hist_3d(centers, L, width, hist):
    n = centers.shape[0]
    nb = hist.shape[0]
    half = nb // 2
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            b = np.empty(3, dtype=np.int64)
            ok = True
            for k in range(3):
                dx = centers[j, k] - centers[i, k]
                dx -= L * np.round(dx / L)
                bk = int(np.floor(dx / width)) + half
                if bk < 0 or bk >= nb:
                    ok = False
                    break
                b[k] = bk
            if ok:
                hist[b[0], b[1], b[2]] += 1


def pair_disp_hist(centers, L, width, rmax, hist):
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if len(centers) < 2:
        return
    if centers.shape[1] == 2:
        _pair_disp_hist_2d(centers, L, width, hist)
    else:
        _pair_disp_hist_3d(centers, L, width, hist)


@njit(cache=True)
def _points_in_union(points, centers, L):
    m, d = points.shape
    n = centers.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        for j in range(n):
            d2 = 0.0
            for k in range(d):
                dx = points[i, k] - centers[j, k]
                dx -= L * np.round(dx / L)
                d2 += dx * dx
            if d2 < 1.0:
                out[i] = True
                break
    return out


def points_in_union(points, centers, L):
    if len(centers) == 0:
        return np.zeros(len(points), dtype=bool)
    return _points_in_union(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(centers, dtype=np.float64), L)


@njit(cache=True)
def _matern_keep(points, marks, r_hard, L):
    n, d = points.shape
    keep = np.ones(n, dtype=np.bool_)
    r2 = r_hard * r_hard
    for i in range(n):
        for j in range(n):
            if i == j or marks[j] >= marks[i]:
                continue
            d2 = 0.0
            for k in range(d):
                dx = points[i, k] - points[j, k]
                dx -= L * np.round(dx / L)
                d2 += dx * dx
            if d2 < r2:
                keep[i] = False
                break
    return keep


def matern_keep(points, marks, r_hard, L):
    if len(points) < 2:
        return np.ones(len(points), dtype=bool)
    return _matern_keep(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(marks, dtype=np.float64), r_hard, L)


@njit(cache=True)
def _flux_div_2d(p, e0, e1, mask, a1, da, h, use_p):
    N0, N1 = mask.shape
    f0 = np.empty((N0, N1))
    f1 = np.empty((N0, N1))
    for i in range(N0):
        ip = i + 1 if i + 1 < N0 else 0
        for j in range(N1):
            jp = j + 1 if j + 1 < N1 else 0
            g0 = e0
            g1 = e1
            if use_p:
                g0 += (p[ip, j] - p[i, j]) / h
                g1 += (p[i, jp] - p[i, j]) / h
            if mask[i, j]:
                f0[i, j] = (a1[0, 0] + da[0, 0]) * g0 + (a1[0, 1] + da[0, 1]) * g1
                f1[i, j] = (a1[1, 0] + da[1, 0]) * g0 + (a1[1, 1] + da[1, 1]) * g1
            else:
                f0[i, j] = a1[0, 0] * g0 + a1[0, 1] * g1
                f1[i, j] = a1[1, 0] * g0 + a1[1, 1] * g1
    div = np.empty((N0, N1))
    for i in range(N0):
        im = i - 1 if i > 0 else N0 - 1
        for j in range(N1):
            jm = j - 1 if j > 0 else N1 - 1
            div[i, j] = (f0[i, j] - f0[im, j] + f1[i, j] - f1[i, jm]) / h
    return div


@njit(cache=True)
def _flux_div_3d(p, e, mask, a1, da, h, use_p):
    N0, N1, N2 = mask.shape
    f = np.empty((3, N0, N1, N2))
    g = np.empty(3)
    for i in range(N0):
        ip = i + 1 if i + 1 < N0 else 0
        for j in range(N1):
            jp = j + 1 if j + 1 < N1 else 0
            for k in range(N2):
                kp = k + 1 if k + 1 < N2 else 0
                g[0] = e[0]
                g[1] = e[1]
                g[2] = e[2]
                if use_p:
                    g[0] += (p[ip, j, k] - p[i, j, k]) / h
                    g[1] += (p[i, jp, k] - p[i, j, k]) / h
                    g[2] += (p[i, j, kp] - p[i, j, k]) / h
                inc = mask[i, j, k] != 0
                for a in range(3):
                    acc = 0.0
                    for b in range(3):
                        coef = a1[a, b] + (da[a, b] if inc else 0.0)
                        acc += coef * g[b]
                    f[a, i, j, k] = acc
    div = np.empty((N0, N1, N2))
    for i in range(N0):
        im = i - 1 if i > 0 else N0 - 1
        for j in range(N1):
            jm = j - 1 if j > 0 else N1 - 1
            for k in range(N2):
                km = k - 1 if k > 0 else N2 - 1
                div[i, j, k] = (f[0, i, j, k] - f[0, im, j, k]
                                + f[1, i, j, k] - f[1, i, jm, k]
                                + f[2, i, j, k] - f[2, i, j, km]) / h
    return div


def flux_divergence(p, e, mask, A1, A2, h):
    a1 = np.ascontiguousarray(A1, dtype=np.float64)
    da = np.ascontiguousarray(A2 - A1, dtype=np.float64)
    use_p = p is not None
    d = mask.ndim
    if d == 2:
        pp = p if use_p else np.zeros((1, 1))
        return _flux_div_2d(pp, float(e[0]), float(e[1]), mask, a1, da, h, use_p)
    pp = p if use_p else np.zeros((1, 1, 1))
    ee = np.ascontiguousarray(e, dtype=np.float64)
    return _flux_div_3d(pp, ee, mask, a1, da, h, use_p)


# post-processing fields are not hot; reuse the numpy versions
from ._kernels_numpy import gradient_field, flux_field  # noqa: E402,F401
