"""Benchmark the numba kernels against their pure-numpy twins.

Run as: python3 benchmarks/bench_kernels.py [--repeat N]

The same functions are timed from both backend modules on identical
inputs; numba functions are called once beforehand so JIT compilation
is not included in the timings.
"""

import argparse
import time

import numpy as np

from dilute_homog import _kernels_numpy as knp

try:
    from dilute_homog import _kernels_numba as knb
except ImportError:
    knb = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    L, N, d = 64.0, 1024, 2
    centers = rng.uniform(0, L, size=(200, d))
    mask = knp.raster_mask(centers, L, N, d)
    p = rng.standard_normal((N, N))
    e = np.array([1.0, 0.0])
    A1, A2 = np.eye(2), 2.0 * np.eye(2)
    h = L / N
    marks = rng.uniform(size=len(centers))
    nb = 2 * int((L / 4) / 1.0)
    hist = np.zeros((nb, nb), dtype=np.int64)

    cases = [
        ("raster_mask (200 pts, 1024^2)",
         lambda k: k.raster_mask(centers, L, N, d)),
        ("flux_divergence (1024^2)",
         lambda k: k.flux_divergence(p, e, mask, A1, A2, h)),
        ("pairwise_stats (200 pts)",
         lambda k: k.pairwise_stats(centers, L)),
        ("pair_disp_hist (200 pts)",
         lambda k: k.pair_disp_hist(centers, L, 1.0, L / 4, hist)),
        ("matern_keep (200 pts)",
         lambda k: k.matern_keep(centers, marks, 2.0, L)),
    ]

    if knb is None:
        print("numba backend unavailable; timing numpy only")

    print(f"{'kernel':38s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, call in cases:
        t_np = timeit(lambda: call(knp), args.repeat)
        if knb is not None:
            call(knb)  # JIT warmup
            t_nb = timeit(lambda: call(knb), args.repeat)
            print(f"{name:38s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms "
                  f"{t_np / t_nb:7.1f}x")
        else:
            print(f"{name:38s} {t_np * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
