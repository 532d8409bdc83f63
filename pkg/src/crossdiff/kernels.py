"""Kernel backend selection.

The compiled extension is used when it imports; set ``CROSSDIFF_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("CROSSDIFF_PURE_PYTHON") == "1":
    _ext = None
else:
    try:
        from . import _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
_impl = _ext if _ext is not None else _pykernels


def _as3d(values):
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim == 2:
        return v[:, :, None], 1
    return v, 2


def laplacian(values, odd, h, backend=None):
    """Five/three-point Laplacian of ``(m, *shape)`` values with ghost extension."""
    impl = _select(backend)
    v, dim = _as3d(values)
    hx = h[0]
    hy = h[1] if dim == 2 else 1.0
    out = np.asarray(impl.laplacian(v, bool(odd), float(hx), float(hy), dim))
    return out.reshape(np.shape(values))


def mean_oscillation(values, offsets, min_cells=4, backend=None):
    impl = _select(backend)
    v, dim = _as3d(values)
    off = np.zeros((len(offsets), 2), dtype=np.int64)
    off[:, : np.shape(offsets)[1]] = offsets
    return impl.mean_oscillation(v, np.ascontiguousarray(off), int(min_cells))


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if _ext is None:
            raise RuntimeError("compiled kernels are not available")
        return _ext
    raise ValueError(f"unknown backend {backend!r}")
