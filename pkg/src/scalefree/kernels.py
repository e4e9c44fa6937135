"""Backend selection for the hot loops.

The Cython extension is used when it was built; otherwise (or when
``SCALEFREE_PURE_PYTHON=1``) the numpy fallback is imported. Both expose
the same three functions and agree to round-off.
"""
import os

from . import _kernels_py

if os.environ.get("SCALEFREE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

bank_log_softmax_mix = _impl.bank_log_softmax_mix
bank_update = _impl.bank_update
spectral_ridge_predict = _impl.spectral_ridge_predict

__all__ = ["BACKEND", "bank_log_softmax_mix", "bank_update", "spectral_ridge_predict"]
