"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``CCAFUSE_PURE_PYTHON=1``
to force the NumPy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CCAFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

box_mean = _impl.box_mean
iou_matrix = _impl.iou_matrix
greedy_match = _impl.greedy_match
