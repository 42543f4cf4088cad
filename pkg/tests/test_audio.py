import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emofuse.audio import (BERNOULLI, NOISY_RELU, DBNConfig, FeatureSequence, FinetuneConfig, FinetuneLog,
                           MLPWithPooling, NonFiniteGradientError, OptimizerState, PoolingConfig, RBMLayer,
                           cd1_update, center_sequences, finetune, loss_and_grad, noisy_relu_bounded,
                           predict_clip, pretrain_dbn, project_max_norm, rmsprop_nesterov_step, topn_pool,
                           topn_pool_backward)
from emofuse.labels import N_CLASSES
from emofuse.synthetic import audio_sequences


# ---------------------------------------------------------------- rbm

def test_noisy_relu_is_bounded():
    x = np.linspace(-20, 20, 101)
    det = noisy_relu_bounded(x)
    assert det.min() == 0.0 and det.max() == 6.0
    rng = np.random.default_rng(0)
    sto = noisy_relu_bounded(x, True, rng)
    assert np.all((sto >= 0) & (sto <= 6))
    with pytest.raises(ValueError):
        noisy_relu_bounded(x, True)


def test_zero_sample_weight_leaves_only_decay():
    rng = np.random.default_rng(1)
    layer = RBMLayer.init(5, 4, rng, scale=0.5, lr=0.1, l2=0.01)
    out = cd1_update(layer, rng.normal(size=(8, 5)), rng, sample_weight=np.zeros(8))
    np.testing.assert_allclose(out.W, layer.W * (1 - 0.1 * 0.01), atol=1e-15)
    assert np.array_equal(out.vbias, layer.vbias) and np.array_equal(out.hbias, layer.hbias)


def test_rbm_validation():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        RBMLayer.init(3, 2, rng, kind="softplus")
    layer = RBMLayer.init(3, 2, rng)
    with pytest.raises(ValueError, match="columns"):
        cd1_update(layer, np.ones((2, 4)), rng)


def test_dbn_layer_kinds_and_shapes():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(64, 6))
    cfg = DBNConfig(hidden_sizes=(5, 4, 3), epochs=2)
    logs = []
    layers = pretrain_dbn(cfg, data, rng, logs)
    assert [l.kind for l in layers] == [NOISY_RELU, BERNOULLI, BERNOULLI]
    assert [l.W.shape for l in layers] == [(6, 5), (5, 4), (4, 3)]
    assert [len(g) for g in logs] == [3, 3, 3]
    with pytest.raises(ValueError):
        DBNConfig(hidden_sizes=(5, 4), learning_rates=(1e-3,))


# ---------------------------------------------------------------- pooling

def test_pooling_weights_must_sum_to_n():
    with pytest.raises(ValueError):
        PoolingConfig(2, (1.0, 0.5), (1.3, 0.7))
    with pytest.raises(ValueError):
        PoolingConfig(3)


def test_single_timestep_renormalizes_weights():
    A = np.array([[0.3, 0.9]])
    np.testing.assert_allclose(topn_pool(A, mode="train"), A[0])
    np.testing.assert_allclose(topn_pool(A, mode="test"), A[0])


def test_ties_route_gradient_to_earliest():
    A = np.array([[0.5], [0.5], [0.5]])
    g = topn_pool_backward(A, np.array([1.0]))
    np.testing.assert_allclose(g[:, 0], [0.7, 0.3, 0.0])


@given(st.integers(0, 10_000), st.integers(1, 9), st.integers(1, 5))
def test_pooled_value_between_min_and_max_of_top(seed, T, d):
    A = np.random.default_rng(seed).random((T, d))
    pooled = topn_pool(A, mode="test")
    top = np.sort(A, axis=0)[::-1][:2]
    assert np.all(pooled <= top.max(axis=0) + 1e-12)
    assert np.all(pooled >= top.min(axis=0) - 1e-12)


# ---------------------------------------------------------------- optimizer

def test_non_finite_gradient_raises():
    state = OptimizerState.init({"w": np.zeros(3)})
    with pytest.raises(NonFiniteGradientError):
        rmsprop_nesterov_step(state, lambda th: {"w": np.array([0.0, np.nan, 1.0])})
    with pytest.raises(ValueError):
        OptimizerState.init(np.zeros(2), rho=1.5)


def test_optimizer_minimizes_quadratic():
    state = OptimizerState.init(np.array([3.0, -2.0]), eps0=0.05, mu=0.5, rho=0.9)
    for _ in range(400):
        state = rmsprop_nesterov_step(state, lambda th: {"theta": 2 * th["theta"]})
    assert np.abs(state.theta["theta"]).max() < 0.05


# ---------------------------------------------------------------- mlp

def _model(seed=0, d=5, h1=6, h2=4, scale=0.4):
    return MLPWithPooling.init(d, h1, h2, np.random.default_rng(seed), scale=scale)


@pytest.mark.parametrize("use_masks", [False, True])
def test_loss_and_grad_matches_finite_differences(use_masks):
    rng = np.random.default_rng(4)
    mlp = _model()
    A = rng.normal(size=(7, 5))
    masks = None
    if use_masks:
        masks = ((rng.random((7, 6)) < 0.8) / 0.8, (rng.random((7, 4)) < 0.8) / 0.8)
    _, g = loss_and_grad(mlp.params, A, 3, mlp.pooling, "train", 1e-2, masks)
    h = 1e-6
    for k in ("W1", "b1", "W2", "b2", "W3", "b3"):
        flat = mlp.params[k].reshape(-1)
        for j in rng.choice(flat.size, min(4, flat.size), replace=False):
            plus = {kk: v.copy() for kk, v in mlp.params.items()}
            minus = {kk: v.copy() for kk, v in mlp.params.items()}
            plus[k].reshape(-1)[j] += h
            minus[k].reshape(-1)[j] -= h
            num = (loss_and_grad(plus, A, 3, mlp.pooling, "train", 1e-2, masks)[0]
                   - loss_and_grad(minus, A, 3, mlp.pooling, "train", 1e-2, masks)[0]) / (2 * h)
            assert g[k].reshape(-1)[j] == pytest.approx(num, rel=1e-4, abs=1e-7)


def test_from_dbn_copies_and_projects():
    rng = np.random.default_rng(5)
    l1 = RBMLayer.init(4, 3, rng, scale=0.1)
    l2 = RBMLayer.init(3, 2, rng, kind=BERNOULLI, scale=5.0)
    mlp = MLPWithPooling.from_dbn([l1, l2], rng)
    np.testing.assert_array_equal(mlp.params["W1"], l1.W)
    assert np.sqrt((mlp.params["W2"] ** 2).sum(axis=0)).max() <= mlp.max_norm + 1e-12
    assert mlp.sizes == (4, 3, 2, N_CLASSES)
    with pytest.raises(ValueError):
        MLPWithPooling.from_dbn([l1], rng)
    with pytest.raises(ValueError, match="chain"):
        MLPWithPooling.from_dbn([l1, RBMLayer.init(5, 2, rng)], rng)


def test_project_max_norm_only_shrinks():
    params = _model(scale=2.0).params
    out = project_max_norm(params, 1.0)
    for k in ("W1", "W2"):
        norms = np.sqrt((out[k] ** 2).sum(axis=0))
        assert norms.max() <= 1.0 + 1e-12
    assert np.array_equal(out["W3"], params["W3"])
    small = project_max_norm(params, 1e6)
    assert all(np.array_equal(small[k], params[k]) for k in params)


def test_save_load_and_dimension_check(tmp_path):
    mlp = _model()
    mlp = MLPWithPooling(mlp.params, offset=np.arange(5.0))
    mlp.save(tmp_path / "m")
    back = MLPWithPooling.load(tmp_path / "m")
    A = np.random.default_rng(6).normal(size=(4, 5))
    np.testing.assert_allclose(back.forward(A), mlp.forward(A), atol=1e-6)
    assert predict_clip(back, FeatureSequence("c", A)).p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError, match="dimension"):
        mlp.forward(np.ones((2, 3)))


def _audio_split(n=70, seed=0):
    ids, mats, y = audio_sequences(n_clips=n, dim=8, seed=seed)
    seqs = [FeatureSequence(i, m) for i, m in zip(ids, mats)]
    return seqs[: n // 2], y[: n // 2], seqs[n // 2:], y[n // 2:]


def test_finetune_rejects_uncentred_features():
    tr, ytr, va, yva = _audio_split()
    shifted = [FeatureSequence(s.clip_id, s.A + 5.0) for s in tr]
    with pytest.raises(ValueError, match="centred"):
        finetune(_model(d=8), shifted, ytr, va, yva, np.random.default_rng(0),
                 FinetuneConfig(iterations=1))


def test_finetune_learns_and_logs():
    tr, ytr, va, yva = _audio_split(140)
    mean, tr, va = center_sequences(tr, va)
    log = FinetuneLog()
    mlp = MLPWithPooling.init(8, 16, 16, np.random.default_rng(1), scale=0.3)
    best = finetune(mlp, tr, ytr, va, yva, np.random.default_rng(2),
                    FinetuneConfig(iterations=15, eps0=0.005), log)
    assert len(log.valid_accuracy) == 15
    assert max(log.valid_accuracy) > 1.0 / N_CLASSES + 0.1
    hits = np.mean([np.argmax(best.forward(s.A)) == y for s, y in zip(va, yva)])
    assert hits == pytest.approx(max(log.valid_accuracy))
    assert log.max_norm_seen <= mlp.max_norm + 1e-9


def test_learning_rate_decays_only_after_threshold():
    tr, ytr, va, yva = _audio_split()
    _, tr, va = center_sequences(tr, va)
    log = FinetuneLog()
    finetune(_model(d=8), tr, ytr, va, yva, np.random.default_rng(3),
             FinetuneConfig(iterations=6, decay_after=3, eps0=0.01), log)
    lr = log.learning_rate
    assert lr[:4] == [0.01] * 4
    assert all(b <= a for a, b in zip(lr, lr[1:]))


def test_patience_stops_early():
    tr, ytr, va, yva = _audio_split()
    _, tr, va = center_sequences(tr, va)
    log = FinetuneLog()
    finetune(_model(d=8), tr, ytr, va, yva, np.random.default_rng(4),
             FinetuneConfig(iterations=50, patience=2, eps0=0.0), log)
    # a zero step size never improves on the starting accuracy
    assert len(log.valid_accuracy) == 2 and log.best_iteration == 0
