"""Hot kernels: compiled Cython core when built, numpy fallback otherwise.

Set ``KRAICHNAN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("KRAICHNAN_PURE_PYTHON"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

ar1 = _impl.ar1
bridge_crossings = _impl.bridge_crossings
curvilinear_sum = _impl.curvilinear_sum

__all__ = ["BACKEND", "ar1", "bridge_crossings", "curvilinear_sum"]
