"""treemapper: satellite-guided street-view planning and annotation-efficient
learning loops for urban tree mapping."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
