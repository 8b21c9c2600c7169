"""Kernel backend selection: compiled extension when available, numpy otherwise.

Set MESHWALK_RASTER_BACKEND=python|cython to force a choice (cython raises if
the extension is missing).
"""

import os

from . import _numpy_impl

try:
    from . import _kernels as _native
except ImportError:
    _native = None


def _select():
    choice = os.environ.get("MESHWALK_RASTER_BACKEND", "auto").lower()
    if choice in ("python", "numpy", "fallback"):
        return _numpy_impl, "python"
    if choice in ("cython", "native", "compiled"):
        if _native is None:
            raise ImportError(
                "MESHWALK_RASTER_BACKEND=cython but the compiled extension is "
                "not available; reinstall with a C compiler present")
        return _native, "cython"
    if _native is not None:
        return _native, "cython"
    return _numpy_impl, "python"


_impl, _name = _select()


def active_backend():
    return _name


def get_impl(name=None):
    """Fetch a specific implementation module (for equivalence tests and benchmarks)."""
    if name is None:
        return _impl
    if name == "python":
        return _numpy_impl
    if name == "cython":
        if _native is None:
            raise ImportError("compiled kernel extension not built")
        return _native
    raise ValueError(f"unknown backend {name!r}")


rasterize = _impl.rasterize
splat_min_depth = _impl.splat_min_depth
