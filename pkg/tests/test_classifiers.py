import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emofuse.classifiers import (GridSearchPlan, KernelConfig, KernelDomainError, LogisticModel, SVMError,
                                 TrainedSVM, gram, grid_search, kernel_eval, logreg_predict, logreg_train,
                                 svm_predict_proba, svm_train, two_stage_search)
from emofuse.classifiers.svm import canonical_order, pairwise_coupling, sigmoid_predict, sigmoid_train
from emofuse.labels import N_CLASSES
from emofuse.synthetic import blobs


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig("linear")
    with pytest.raises(ValueError):
        KernelConfig("rbf", gamma=0.0)
    with pytest.raises(ValueError):
        KernelConfig("rbf", C=np.inf)


def test_kernel_values_by_hand():
    x, y = np.array([1.0, 2.0]), np.array([2.0, 0.0])
    assert kernel_eval(KernelConfig("rbf", 0.5), x, y) == pytest.approx(np.exp(-0.5 * 5.0))
    chi = (1.0 / 3.0) + (4.0 / 2.0)
    assert kernel_eval(KernelConfig("chi2", 0.5), x, y) == pytest.approx(np.exp(-0.5 * chi))
    with pytest.raises(KernelDomainError):
        kernel_eval(KernelConfig("chi2"), -x, y)
    with pytest.raises(ValueError):
        kernel_eval(KernelConfig(), x, np.ones(3))


@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)), elements=st.floats(0, 5)),
       st.sampled_from(["rbf", "chi2"]), st.floats(0.01, 5))
def test_gram_is_symmetric_psd_and_matches_pointwise(X, kind, gamma):
    cfg = KernelConfig(kind, gamma)
    G = gram(cfg, X)
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-8
    i, j = 0, len(X) - 1
    assert G[i, j] == pytest.approx(kernel_eval(cfg, X[i], X[j]), rel=1e-9, abs=1e-12)
    np.testing.assert_allclose(np.diag(G), 1.0)


def test_canonical_order_makes_training_order_free():
    X, y = blobs(n_per_class=8, n_classes=3, seed=4)
    cfg = KernelConfig("rbf", 0.5, 3.0)
    a = svm_train(X, y, cfg)
    perm = np.random.default_rng(0).permutation(len(y))
    b = svm_train(X[perm], y[perm], cfg)
    Xt = np.random.default_rng(1).normal(size=(10, 2)) * 3
    assert np.array_equal(a.predict_proba(Xt), b.predict_proba(Xt))
    order = canonical_order(X, y)
    assert np.all(np.diff(y[order]) >= 0)


def test_svm_probabilities_and_single_vector():
    X, y = blobs(n_per_class=10, n_classes=4, seed=2)
    model = svm_train(X, y, KernelConfig("rbf", 1.0, 10.0))
    P = model.predict_proba(X)
    assert P.shape == (len(X), N_CLASSES)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(P[:, 4:] == 0)  # absent classes get no mass
    assert np.array_equal(svm_predict_proba(model, X[0]), P[0])
    with pytest.raises(SVMError):
        svm_predict_proba(model, X[:2])
    with pytest.raises(SVMError, match="dimension"):
        model.predict_proba(np.ones((1, 3)))


def test_svm_needs_two_classes_and_finite_input():
    with pytest.raises(SVMError):
        svm_train(np.ones((3, 2)), [1, 1, 1], KernelConfig())
    with pytest.raises(SVMError):
        svm_train(np.array([[np.nan, 1], [0, 1]]), [0, 1], KernelConfig())


def test_svm_save_load(tmp_path):
    X, y = blobs(n_per_class=6, n_classes=3, seed=5)
    model = svm_train(X, y, KernelConfig("rbf", 0.3, 2.0))
    model.save(tmp_path / "m")
    back = TrainedSVM.load(tmp_path / "m")
    np.testing.assert_allclose(back.predict_proba(X), model.predict_proba(X), atol=1e-5)


def test_kkt_conditions_hold():
    X, y = blobs(n_per_class=12, n_classes=2, spread=1.5, seed=7)
    cfg = KernelConfig("rbf", 0.5, 1.0)
    model = svm_train(X, y, cfg)
    m = model.machines[0]
    assert m.kkt_gap <= 1e-3
    assert np.all(m.alpha > 0) and np.all(m.alpha <= cfg.C + 1e-12)


def test_sigmoid_fit_separates_scores():
    dec = np.linspace(-3, 3, 40)
    y = np.where(dec > 0, 1.0, -1.0)
    A, B = sigmoid_train(dec, y)
    p = sigmoid_predict(dec, A, B)
    assert A < 0
    assert p[-1] > 0.9 and p[0] < 0.1
    assert np.all(np.diff(p) >= 0)


def test_pairwise_coupling_recovers_consistent_probabilities():
    p = np.array([0.5, 0.3, 0.2])
    R = p[:, None] / (p[:, None] + p[None, :])
    np.fill_diagonal(R, 0)
    out = pairwise_coupling(R[None])[0]
    np.testing.assert_allclose(out, p, atol=5e-3)
    assert out.sum() == pytest.approx(1.0)


def test_grid_search_prefers_smaller_C_on_ties():
    X, y = blobs(n_per_class=6, n_classes=2, seed=8)
    configs = [KernelConfig("rbf", 1.0, c) for c in (10.0, 1.0, 100.0)]
    best, records = grid_search(configs, (X, y), (X, y))
    assert best.C == 1.0 and len(records) == 3
    plan = GridSearchPlan(coarse_gamma_exp=(-1, 0), coarse_c_exp=(0, 1), fine_exp=(0.0, 1.0))
    best2, log = two_stage_search(plan, (X, y), (X, y), threads=2)
    assert len(log) == 8
    best1, _ = two_stage_search(plan, (X, y), (X, y), threads=1)
    assert best1 == best2


def test_logistic_regression_separable_toy():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 3.0], [3.0, 4.0]])
    y = np.array([0, 0, 2, 2])
    model = logreg_train(X, y, l2=0.0, max_iter=500)
    assert np.array_equal(model.predict(X), y)
    p = logreg_predict(model, X[0])
    assert p.shape == (N_CLASSES,) and p.sum() == pytest.approx(1.0)


def test_logistic_loss_decreases_and_round_trips(tmp_path):
    X, y = blobs(n_per_class=10, n_classes=3, spread=1.0, seed=3)
    losses = []
    model = logreg_train(X, y, l2=1e-2, callback=lambda it, loss: losses.append(loss))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    model.save(tmp_path / "lr")
    back = LogisticModel.load(tmp_path / "lr")
    np.testing.assert_allclose(back.predict_proba(X), model.predict_proba(X), atol=1e-5)
    with pytest.raises(ValueError):
        logreg_train(X, y, l2=-1.0)
