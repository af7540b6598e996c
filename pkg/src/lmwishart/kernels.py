"""Hot-loop kernels with a compiled implementation when available.

``BACKEND`` is ``"cython"`` when the extension imported, ``"python"``
otherwise.  Setting ``LMWISHART_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.logdet_minors
_gram_impl = _kernels_py.logdet_gram_minors

if os.environ.get("LMWISHART_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled

        _impl = _compiled.logdet_minors
        _gram_impl = _compiled.logdet_gram_minors
        BACKEND = "cython"
    except ImportError:
        pass


def pack_index_sets(sets):
    """Flatten vertex sets (1-based) into (idx, ptr) arrays of 0-based indices."""
    idx, ptr = [], [0]
    for vs in sets:
        idx.extend(v - 1 for v in sorted(vs))
        ptr.append(len(idx))
    return np.asarray(idx, dtype=np.int64), np.asarray(ptr, dtype=np.int64)


def _pick(backend, compiled, fallback):
    if backend == "python":
        return fallback
    if backend == "cython" and BACKEND != "cython":
        raise RuntimeError("compiled kernel not available")
    return compiled


def _prep(a, idx, ptr):
    return (
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(idx, dtype=np.int64),
        np.ascontiguousarray(ptr, dtype=np.int64),
    )


def logdet_minors(S, idx, ptr, backend=None):
    """log det of each principal minor for a batch of matrices, shape (n, m).

    Minors that are not positive definite give NaN.
    """
    return _pick(backend, _impl, _kernels_py.logdet_minors)(*_prep(S, idx, ptr))


def logdet_gram_minors(F, idx, ptr, backend=None):
    """log det (F_K^T F_K) for each column subset K, batched; shape (n, m).

    With Σ = F^T F this gives principal minors of Σ without forming Σ.
    """
    return _pick(backend, _gram_impl, _kernels_py.logdet_gram_minors)(*_prep(F, idx, ptr))
