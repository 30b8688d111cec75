"""Select the element-matrix backend at import time.

The compiled ``_kernels`` extension is used when it was built; setting
``GELFLOW_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("GELFLOW_PURE_PYTHON", "") not in ("", "0"):
    _ext = None
else:
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "numpy"
_impl = _ext if _ext is not None else _kernels_py


def _prep(x, tri):
    return np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(tri, dtype=np.int64)


def p2_stiffness(x, tri, qw, dphi2, impl=None):
    x, tri = _prep(x, tri)
    return (impl or _impl).p2_stiffness(x, tri, np.ascontiguousarray(qw), np.ascontiguousarray(dphi2))


def p2p1_divergence(x, tri, qw, dphi2, phi1, impl=None):
    x, tri = _prep(x, tri)
    return (impl or _impl).p2p1_divergence(
        x, tri, np.ascontiguousarray(qw), np.ascontiguousarray(dphi2), np.ascontiguousarray(phi1))


def p1_mass(x, tri, impl=None):
    return (impl or _impl).p1_mass(*_prep(x, tri))


def p1_stiffness(x, tri, impl=None):
    return (impl or _impl).p1_stiffness(*_prep(x, tri))


def implementations():
    """All importable backends by name, for benchmarks and equivalence tests."""
    out = {"numpy": _kernels_py}
    if _ext is not None:
        out["cython"] = _ext
    return out
