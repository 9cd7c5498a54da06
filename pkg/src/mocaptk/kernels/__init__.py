"""Hot recurrent kernels with a compiled core and a numpy fallback.

The compiled extension (Cython) is picked at import time when present;
MOCAPTK_PURE_PYTHON=1 forces the numpy implementation.  ``BACKEND``
reports which one is active.
"""
import os

if os.environ.get("MOCAPTK_PURE_PYTHON"):
    from . import _ref as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _ref as _impl

BACKEND = _impl.BACKEND
lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward

__all__ = ["BACKEND", "lstm_gates_forward", "lstm_gates_backward"]
