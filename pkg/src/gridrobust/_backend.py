"""Picks the kernel implementation at import time.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``GRIDROBUST_PURE_PYTHON`` is set to a non-empty value, the numpy
``_fallback`` module is used. :func:`set_backend` switches at runtime.
"""

import importlib
import os

_NAMES = {"cython": "gridrobust._kernels", "python": "gridrobust._fallback"}

kernels = None
name = None


def set_backend(which):
    """Switch to ``"cython"`` or ``"python"``; raises ImportError if the
    compiled module is unavailable."""
    global kernels, name
    if which not in _NAMES:
        raise ValueError(f"unknown backend {which!r}")
    kernels = importlib.import_module(_NAMES[which])
    name = which
    return kernels


def available():
    out = ["python"]
    try:
        importlib.import_module(_NAMES["cython"])
    except ImportError:
        return out
    return ["cython"] + out


if os.environ.get("GRIDROBUST_PURE_PYTHON"):
    set_backend("python")
else:
    try:
        set_backend("cython")
    except ImportError:
        set_backend("python")
