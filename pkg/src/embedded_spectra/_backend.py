"""Select the integration kernel at import time.

The compiled kernel is used when it was built; set
``EMBEDDED_SPECTRA_PURE_PYTHON=1`` to force the pure-Python loop.
"""
import os

from . import _dopri_py

_force_python = os.environ.get("EMBEDDED_SPECTRA_PURE_PYTHON", "").lower() in ("1", "true", "yes")

try:
    if _force_python:
        raise ImportError("pure-Python backend requested")
    from . import _dopri_kernel as _compiled
except ImportError:
    _compiled = None

KERNELS = {"python": _dopri_py.dopri5}
if _compiled is not None:
    KERNELS["cython"] = _compiled.dopri5

BACKEND = "cython" if _compiled is not None else "python"
dopri5 = KERNELS[BACKEND]


def get_kernel(name=None):
    if name is None:
        return dopri5
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} unavailable; have {sorted(KERNELS)}") from None
