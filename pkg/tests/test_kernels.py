import os
import subprocess
import sys

import numpy as np
import pytest

from lmwishart import kernels
from lmwishart.matrix_core import random_spd

SETS = [{1}, {2, 3}, {1, 2, 4}, {1, 2, 3, 4, 5}, {3, 5}]


def batch(n, p, seed):
    rng = np.random.default_rng(seed)
    return np.stack([random_spd(p, rng) for _ in range(n)])


def reference(S, sets):
    return np.array([[np.linalg.slogdet(s[np.ix_(ix, ix)])[1] for ix in ([v - 1 for v in sorted(K)] for K in sets)] for s in S])


def test_pack():
    idx, ptr = kernels.pack_index_sets([{2, 1}, {3}])
    assert idx.tolist() == [0, 1, 2] and ptr.tolist() == [0, 2, 3]


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=pytest.mark.skipif(
    kernels.BACKEND != "cython", reason="compiled extension not built"))])
def test_logdet_minors(backend):
    S = batch(50, 5, 0)
    idx, ptr = kernels.pack_index_sets(SETS)
    assert np.allclose(kernels.logdet_minors(S, idx, ptr, backend=backend), reference(S, SETS), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=pytest.mark.skipif(
    kernels.BACKEND != "cython", reason="compiled extension not built"))])
def test_gram_minors(backend):
    rng = np.random.default_rng(1)
    F = rng.normal(size=(40, 5, 5))
    S = np.einsum("nki,nkj->nij", F, F)
    idx, ptr = kernels.pack_index_sets(SETS)
    assert np.allclose(kernels.logdet_gram_minors(F, idx, ptr, backend=backend), reference(S, SETS), rtol=1e-10, atol=1e-10)


def test_backends_agree():
    if kernels.BACKEND != "cython":
        pytest.skip("compiled extension not built")
    S = batch(200, 6, 2)
    idx, ptr = kernels.pack_index_sets([{1, 2, 3}, {4, 5, 6}, {2, 6}])
    a = kernels.logdet_minors(S, idx, ptr, backend="python")
    b = kernels.logdet_minors(S, idx, ptr, backend="cython")
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_not_pd_gives_nan():
    S = np.array([[[1.0, 2.0], [2.0, 1.0]]])
    idx, ptr = kernels.pack_index_sets([{1}, {1, 2}])
    for backend in ["python"] + (["cython"] if kernels.BACKEND == "cython" else []):
        out = kernels.logdet_minors(S, idx, ptr, backend=backend)
        assert out[0, 0] == 0 and np.isnan(out[0, 1])


def test_pure_python_env():
    env = dict(os.environ, LMWISHART_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import lmwishart.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_forced_cython_unavailable(monkeypatch):
    monkeypatch.setattr(kernels, "BACKEND", "python")
    with pytest.raises(RuntimeError):
        kernels.logdet_minors(batch(1, 2, 0), *kernels.pack_index_sets([{1}]), backend="cython")
