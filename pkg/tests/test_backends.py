"""The compiled kernels and their numpy twins must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emofuse import _kernels
from emofuse.classifiers import KernelConfig, gram

pytestmark = pytest.mark.skipif("compiled" not in _kernels.available_backends(),
                                reason="compiled extension not built")


def _both(fn, *args):
    return fn(*args, backend="compiled"), fn(*args, backend="python")


@given(st.integers(0, 10_000), st.integers(2, 30), st.floats(0.1, 10.0))
def test_smo_solve_identical(seed, n, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    K = gram(KernelConfig("rbf", 0.7), X)
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * K)
    a, b = _both(_kernels.smo_solve, Q, y, C, 1e-3, 100_000)
    assert np.array_equal(a[0], b[0])
    assert a[1:] == b[1:]


@given(st.integers(0, 10_000), st.integers(1, 200), st.integers(1, 13), st.integers(1, 9))
def test_assign_nearest_identical(seed, n, K, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    C = rng.normal(size=(K, d))
    if K > 1:
        C[-1] = C[0]  # duplicate centroid: ties go to the lower index
    (la, da), (lb, db) = _both(_kernels.assign_nearest, X, C)
    assert np.array_equal(la, lb) and np.array_equal(da, db)
    assert np.all(la != K - 1) or K == 1


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 50))
def test_fusion_kernels_identical(seed, M, n):
    rng = np.random.default_rng(seed)
    P = rng.random((M, n, 7))
    Ws = rng.random((17, 7, M))
    gold = rng.integers(0, 7, n)
    a, b = _both(_kernels.fuse_scores, P, np.ascontiguousarray(Ws[0]))
    assert np.array_equal(a, b)
    ca, cb = _both(_kernels.count_correct, P, Ws, gold)
    assert np.array_equal(ca, cb)
    direct = [(np.argmax(_kernels.fuse_scores(P, np.ascontiguousarray(w)), axis=1) == gold).sum() for w in Ws]
    assert np.array_equal(ca, direct)


def test_backend_environment_variable(monkeypatch):
    import importlib
    monkeypatch.setenv("EMOFUSE_BACKEND", "python")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("EMOFUSE_BACKEND")
        importlib.reload(_kernels)
