"""Element kernels: the compiled extension when available, NumPy otherwise.

Set ``GPVORTEX_PURE=1`` to force the NumPy implementations.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("GPVORTEX_PURE", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "numpy"


def _c(a, dtype=float):
    return np.ascontiguousarray(a, dtype=dtype)


def eval_at_qp(tris, bary, vals):
    return _impl.eval_at_qp(_c(tris, np.int64), _c(bary), _c(vals))


def scatter_load(tris, bary, coef, n):
    return _impl.scatter_load(_c(tris, np.int64), _c(bary), _c(coef), int(n))


def weighted_mass_local(tris, bary, coef):
    return _impl.weighted_mass_local(_c(tris, np.int64), _c(bary), _c(coef))


def triangle_winding(tris, re, im):
    return _impl.triangle_winding(_c(tris, np.int64), _c(re), _c(im))
