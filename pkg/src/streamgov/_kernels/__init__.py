"""Kernel backend selection.

The compiled Cython extension is used when available; otherwise the numpy
fallback is selected. Set ``STREAMGOV_PURE_PYTHON=1`` to force the fallback
(used by the backend-parity tests and the benchmark).
"""
import os

from . import _fallback

if os.environ.get("STREAMGOV_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

offset_scan = _impl.offset_scan
shift_losses = _impl.shift_losses
pairwise_l1 = _impl.pairwise_l1

__all__ = ["offset_scan", "shift_losses", "pairwise_l1", "BACKEND"]
