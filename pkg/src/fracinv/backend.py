"""Selection of the time-marching kernel.

The compiled extension is used when it imports; setting the environment
variable ``FRACINV_PURE_PYTHON=1`` forces the NumPy implementation.
"""
import os

from . import _cqcore_py

try:
    from . import _cqcore as _compiled
except ImportError:  # extension not built
    _compiled = None

_FORCE_PURE = os.environ.get("FRACINV_PURE_PYTHON", "") not in ("", "0")

if _compiled is not None and not _FORCE_PURE:
    march = _compiled.march
    BACKEND = "cython"
else:
    march = _cqcore_py.march
    BACKEND = "python"

march_python = _cqcore_py.march
march_compiled = _compiled.march if _compiled is not None else None

__all__ = ["march", "march_python", "march_compiled", "BACKEND"]
