"""Kernel selection: compiled extension when importable, else pure Python.

Set ``GEXPRISK_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("GEXPRISK_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

IMPLEMENTATION = _impl.IMPLEMENTATION
CASE1, CASE2, CASE3, AVAR, ENTROPIC = _impl.CASE1, _impl.CASE2, _impl.CASE3, _impl.AVAR, _impl.ENTROPIC

euler_affine = _impl.euler_affine
g_scalar = _impl.g_scalar
reduced_objective = _impl.reduced_objective
golden_min_gbar = _impl.golden_min_gbar
slope_excess = _impl.slope_excess

__all__ = [
    "IMPLEMENTATION",
    "euler_affine",
    "g_scalar",
    "reduced_objective",
    "golden_min_gbar",
    "slope_excess",
]
