"""Backend selection for the hot inner loops.

The Cython extension ``_kernels`` is used when it was built; otherwise the
numpy fallback in ``_kernels_py`` is loaded. Set ``ALPOLICY_PURE_PYTHON=1``
to force the fallback (tests and the benchmark use this to compare both).
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ALPOLICY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return a kernel module by name ("cython" or "python"); None gives the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def svm_fit_smo(X, y, lam, tol=1e-9, max_iter=100_000):
    w, b = _impl.svm_fit_smo(_c(X), _c(y), float(lam), float(tol), int(max_iter))
    return np.asarray(w), float(b)


def svm_fit_subgradient(X, y, lam, n_iter):
    w, b = _impl.svm_fit_subgradient(_c(X), _c(y), float(lam), int(n_iter))
    return np.asarray(w), float(b)


def column_histograms(Z, nbins=10):
    return np.asarray(_impl.column_histograms(_c(Z), int(nbins)))


def joint_histograms(Z, post, nbins=10):
    return np.asarray(_impl.joint_histograms(_c(Z), _c(post), int(nbins)))


def min_distances(A, B):
    return np.asarray(_impl.min_distances(_c(A), _c(B)))
