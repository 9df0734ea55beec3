"""Kernel backend selection.

Set ``DILUTE_HOMOG_BACKEND=numpy`` to force the pure-numpy kernels (the
default is the numba-compiled set when numba imports cleanly). The two
backends expose the same functions and agree to floating-point roundoff;
``benchmarks/bench_kernels.py`` compares their throughput.
"""

import os
import warnings

_requested = os.environ.get("DILUTE_HOMOG_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise RuntimeError(
        f"DILUTE_HOMOG_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from . import _kernels_numba as _impl
        BACKEND = "numba"
    except ImportError:  # numba missing or broken: degrade, don't fail
        warnings.warn("numba unavailable, falling back to numpy kernels")
        from . import _kernels_numpy as _impl
        BACKEND = "numpy"
else:
    from . import _kernels_numpy as _impl
    BACKEND = "numpy"

raster_mask = _impl.raster_mask
pairwise_stats = _impl.pairwise_stats
close_pairs = _impl.close_pairs
pair_disp_hist = _impl.pair_disp_hist
points_in_union = _impl.points_in_union
matern_keep = _impl.matern_keep
flux_divergence = _impl.flux_divergence
gradient_field = _impl.gradient_field
flux_field = _impl.flux_field
