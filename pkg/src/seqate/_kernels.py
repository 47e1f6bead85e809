"""Kernel dispatch: the compiled core when importable, numpy otherwise.

Set ``SEQATE_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

CONSTANT = _kernels_py.CONSTANT
WEI_LINEAR = _kernels_py.WEI_LINEAR
EFRON = _kernels_py.EFRON

_impl = _kernels_py
BACKEND = "python"
if not os.environ.get("SEQATE_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


def assign_batch(kind, param, delta, u, backend=None):
    """Run the assignment loop for every row of the uniform matrix ``u``.

    Returns ``(p, k)`` with ``k`` as uint8; ``k[r, i] = 1`` iff
    ``u[r, i] < p[r, i]``.
    """
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError("u must be a 2-d array of uniforms")
    p = np.empty_like(u)
    k = np.empty(u.shape, dtype=np.uint8)
    get_backend(backend).assign_batch(int(kind), float(param), float(delta), u, p, k)
    return p, k


def efron_chain(eta, u, backend=None):
    """Imbalance path D_1..D_n of Efron's coin driven by uniforms ``u``."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    d = np.empty(u.shape[0], dtype=np.int64)
    get_backend(backend).efron_chain(float(eta), u, d)
    return d
