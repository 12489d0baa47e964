"""Backend selection for the hot loops.

The compiled extension ``dpeval._kernels`` is used when it imports; set
``DPEVAL_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
from __future__ import annotations

import os

from . import _fallback

fallback = _fallback

if os.environ.get("DPEVAL_PURE_PYTHON") == "1":
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"

sample_batch = _impl.sample_batch
first_visit_stats = _impl.first_visit_stats
smooth_max_w = _impl.smooth_max_w
smooth_max_lambda = _impl.smooth_max_lambda

__all__ = [
    "BACKEND",
    "compiled",
    "fallback",
    "sample_batch",
    "first_visit_stats",
    "smooth_max_w",
    "smooth_max_lambda",
]
