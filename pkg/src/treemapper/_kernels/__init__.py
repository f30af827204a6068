"""Kernel lane selection.

Prefers the compiled extension; falls back to the numpy implementations
when the extension is missing or TREEMAPPER_PURE_KERNELS=1 is set. Both
lanes expose the same functions with identical semantics.
"""

import os

if os.environ.get("TREEMAPPER_PURE_KERNELS") == "1":
    from . import pure as _impl
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pure as _impl

BACKEND = _impl.BACKEND_NAME

tm_forward = _impl.tm_forward
tm_inverse = _impl.tm_inverse
min_dist_to_segments = _impl.min_dist_to_segments
iou_matrix = _impl.iou_matrix
greedy_assign = _impl.greedy_assign

__all__ = [
    "BACKEND",
    "tm_forward",
    "tm_inverse",
    "min_dist_to_segments",
    "iou_matrix",
    "greedy_assign",
]
