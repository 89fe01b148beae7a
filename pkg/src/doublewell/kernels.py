"""Backend selection for the hot loops.

The compiled extension ``doublewell._ckernels`` is used when it imports;
otherwise the numpy/pure-Python module ``doublewell._pykernels`` takes over.
Set ``DOUBLEWELL_PURE_PYTHON=1`` to force the fallback.
"""

import importlib
import os

from . import _pykernels

_FORCE_PY = os.environ.get("DOUBLEWELL_PURE_PYTHON", "").strip() not in ("", "0")

try:
    if _FORCE_PY:
        raise ImportError("pure-Python backend forced")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

convolve = _impl.convolve
convolve_rows = _impl.convolve_rows
many_body_matrix = _impl.many_body_matrix


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("doublewell._ckernels")
        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the kernel module called ``name`` ("python" or "cython")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("doublewell._ckernels")
    raise ValueError(f"unknown backend {name!r}")
