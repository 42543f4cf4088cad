"""End-to-end acceptance checks, one group per numbered criterion.

Each test carries ``@pytest.mark.criterion(n)``; the terminal summary prints
one PASS/FAIL line per criterion.
"""

import filecmp
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from emofuse.aggregation import DESCRIPTOR_DIM, FrameProbabilitySequence, build_descriptor, group_bounds
from emofuse.audio import (FeatureSequence, FinetuneConfig, FinetuneLog, MLPWithPooling, OptimizerState,
                           PoolingConfig, RBMLayer, center_sequences, finetune, reconstruction_error,
                           rmsprop_nesterov_step, topn_pool, topn_pool_backward, train_rbm)
from emofuse.audio.mlp import CONSTRAINED, MAX_NORM
from emofuse.bof import (MouthConfig, bag_of_mouth_train, kmeans_fit,
                         triangle_from_distances, whiten_apply, whiten_fit)
from emofuse.classifiers import KernelConfig, gram, svm_train
from emofuse.classifiers.logreg import loss_and_grad as logreg_loss_and_grad
from emofuse.cli import main as cli_main
from emofuse.facetube import FaceTube, SmoothingConfig, squares, stabilize_side_lengths, stabilize_tube
from emofuse.fusion import (ExpertBundle, SearchConfig, WeightMatrix, build_swapped_predictions,
                            enumerate_subset_averages, random_search, weighted_average)
from emofuse.labels import N_CLASSES, softmax
from emofuse.synthetic import audio_sequences, blobs, complementary_experts, mouth_faces, two_cluster


# ---------------------------------------------------------------- 1

def brute_force_descriptor(rows):
    """Independent floor-boundary reference built from explicit index lists."""
    T = len(rows)
    if T >= 10:
        blocks = []
        for g in range(10):
            members = [t for t in range(T) if (g * T) // 10 <= t < ((g + 1) * T) // 10]
            blocks.append(sum(rows[t] for t in members) / len(members))
    else:
        blocks = [rows[(s * T) // 10] for s in range(10)]
    return np.concatenate(blocks)


@pytest.mark.criterion(1)
def test_aggregation_matches_brute_force():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    for T in range(1, 41):
        rows = softmax(rng.normal(size=(T, N_CLASSES)), axis=1)
        d = build_descriptor(FrameProbabilitySequence("c", rows))
        assert d.shape == (DESCRIPTOR_DIM,) == (70,)
        assert np.array_equal(d, brute_force_descriptor(list(rows)))
        np.testing.assert_allclose(d.reshape(10, N_CLASSES).sum(axis=1), 1.0, atol=1e-6)
    assert tuple(b - a for a, b in group_bounds(23)) == (2, 2, 2, 3, 2, 2, 3, 2, 2, 3)
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------- 2

@pytest.mark.criterion(2)
def test_facetube_fixed_points_and_fits():
    start = time.perf_counter()
    cfg = SmoothingConfig()
    const = FaceTube.from_coords(range(20), np.tile([10.0, 20.0, 60.0, 70.0], (20, 1)))
    assert np.array_equal(stabilize_tube(const, cfg).coords(), const.coords())

    T = 30
    for slope in (0.2, -0.3, 0.06):
        assert abs(slope) * T > 1.5
        side = 40.0 + slope * np.arange(T)
        cx, cy = 100.0, 80.0
        boxes = np.stack([cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2], axis=1)
        tube = FaceTube.from_coords(range(T), boxes)
        out = stabilize_side_lengths(squares(tube), cfg).coords()
        np.testing.assert_allclose(out, boxes, atol=1e-9, rtol=0)
        np.testing.assert_allclose(stabilize_tube(tube, cfg).coords(), boxes, atol=1e-9, rtol=0)

    for slope in (0.01, -0.04):
        assert abs(slope) * T < 1.5
        side = 40.0 + slope * np.arange(T)
        boxes = np.stack([100 - side / 2, 80 - side / 2, 100 + side / 2, 80 + side / 2], axis=1)
        out = stabilize_side_lengths(FaceTube.from_coords(range(T), boxes), cfg).coords()
        np.testing.assert_allclose(out[:, 2] - out[:, 0], side.mean(), atol=1e-9, rtol=0)
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------- 3

def sort_and_dot(A, weights, N):
    out = []
    for col in np.asarray(A).T:
        top = sorted(col, reverse=True)[:N]
        out.append(sum(w * v for w, v in zip(weights, top)) / N)
    return np.array(out)


@pytest.mark.criterion(3)
def test_topn_pooling_example_and_gradient():
    start = time.perf_counter()
    A = np.array([[0.9, 0.1], [0.5, 0.7], [0.3, 0.2]])
    cfg = PoolingConfig()
    F = topn_pool(A, cfg, "test")
    assert np.array_equal(F, sort_and_dot(A, (1.3, 0.7), 2))
    np.testing.assert_allclose(F, [0.76, 0.525], rtol=0, atol=1e-15)

    rng = np.random.default_rng(3)
    h = 1e-6
    checked = 0
    while checked < 100:
        T, D = int(rng.integers(1, 8)), int(rng.integers(1, 5))
        A = rng.random((T, D))
        sorted_cols = np.sort(A, axis=0)
        if T > 1 and np.min(np.diff(sorted_cols, axis=0)) < 1e-3:
            continue  # ties make the pooling non-differentiable
        up = rng.normal(size=D)
        for mode in ("train", "test"):
            g = topn_pool_backward(A, up, cfg, mode)
            num = np.zeros_like(A)
            for idx in np.ndindex(*A.shape):
                Ap, Am = A.copy(), A.copy()
                Ap[idx] += h
                Am[idx] -= h
                num[idx] = (up @ topn_pool(Ap, cfg, mode) - up @ topn_pool(Am, cfg, mode)) / (2 * h)
            assert np.max(np.abs(g - num)) <= 1e-5 * max(1.0, np.max(np.abs(num)))
        checked += 1
    assert time.perf_counter() - start < 5.0


# ---------------------------------------------------------------- 4

@pytest.mark.criterion(4)
def test_rmsprop_nesterov_closed_form():
    eps0, mu, rho, delta = 0.0005, 0.46, 0.92, 1e-8
    state = OptimizerState.init(np.array([1.0]), mu=mu, eps0=eps0, rho=rho)
    new = rmsprop_nesterov_step(state, lambda th: {"theta": th["theta"].copy()})
    g = 1.0
    r = rho * 1.0 + (1 - rho) * g * g
    v = mu * 0.0 - eps0 * g
    theta = 1.0 + (mu * v - eps0 * g) / np.sqrt(r + delta)
    assert abs(new.theta["theta"][0] - theta) <= 1e-12
    assert abs(new.v["theta"][0] - v) <= 1e-12
    assert abs(new.rms["theta"][0] - r) <= 1e-12

    frozen = OptimizerState.init(np.array([2.0, -3.0]), rho=1.0)
    for _ in range(3):
        frozen = rmsprop_nesterov_step(frozen, lambda th: {"theta": th["theta"] * 5.0})
    assert np.array_equal(frozen.rms["theta"], np.ones(2))


# ---------------------------------------------------------------- 5

@pytest.mark.criterion(5)
def test_max_norm_holds_through_finetuning():
    ids, mats, labels = audio_sequences(n_clips=140, seed=0)
    seqs = [FeatureSequence(c, A) for c, A in zip(ids, mats)]
    mean, train, valid = center_sequences(seqs[:100], seqs[100:])
    rng = np.random.default_rng(0)
    mlp = MLPWithPooling.init(mats[0].shape[1], 24, 24, rng, scale=0.5)
    worst = []

    def watch(params):
        worst.append(max(float(np.sqrt((params[k] ** 2).sum(axis=0)).max()) for k in CONSTRAINED))

    log = FinetuneLog()
    finetune(mlp, train, labels[:100], valid, labels[100:], rng,
             FinetuneConfig(iterations=50, eps0=0.005), log, on_update=watch)
    assert len(worst) == 50 * (100 - 12)
    assert max(worst) <= MAX_NORM + 1e-9
    assert max(worst) > MAX_NORM - 1e-3  # the constraint was actually active


# ---------------------------------------------------------------- 6

@pytest.mark.criterion(6)
def test_rbm_reconstruction_improves():
    X = two_cluster(n=400, dim=8, seed=0)
    rng = np.random.default_rng(0)
    layer = RBMLayer.init(X.shape[1], 16, rng)
    log = []
    train_rbm(layer, X, 50, rng, batch_size=32, log=log)
    assert log[0] == pytest.approx(reconstruction_error(layer, X))
    assert log[-1] <= 0.8 * log[0]


# ---------------------------------------------------------------- 7

@pytest.mark.criterion(7)
def test_bag_of_features_contracts():
    a = triangle_from_distances(np.array([[1.0, 2.0, 3.0]]))
    assert np.array_equal(a, [[1.0, 0.0, 0.0]])
    rng = np.random.default_rng(0)
    assert np.all(triangle_from_distances(rng.random((50, 9)) * 5) >= 0)

    for seed in range(10):
        X = np.random.default_rng(seed).normal(size=(300, 4)) + np.repeat(np.eye(4)[:3] * 4, 100, axis=0)
        cb = kmeans_fit(X, 6, seed=seed)
        obj = np.array(cb.objective)
        assert len(obj) >= 1 and np.all(np.diff(obj) <= 0)

    X = rng.normal(size=(2000, 12)) @ rng.normal(size=(12, 12))
    t = whiten_fit(X, "fixed", k=12)
    Z = whiten_apply(t, X)
    cov = np.cov(Z, rowvar=False, bias=True)
    assert np.linalg.norm(cov - np.eye(12)) <= 1e-6

    _, videos, ys = mouth_faces(n_clips=2, frames_per_clip=1, seed=0)
    cfg = MouthConfig(max_iter=5)
    assert cfg.K == 400 and cfg.grid.n_regions == 16
    model = bag_of_mouth_train([v[0] for v in videos], list(ys), cfg, seed=0)
    d = model.descriptor(videos[0][0])
    assert cfg.descriptor_dim == 6400 and d.shape == (6400,)


# ---------------------------------------------------------------- 8

@pytest.mark.criterion(8)
def test_classifier_contracts():
    X, y = blobs(n_per_class=15, n_classes=3, seed=1)
    for kind in ("rbf", "chi2"):
        Xk = X - X.min() + 0.1 if kind == "chi2" else X
        model = svm_train(Xk, y, KernelConfig(kind, 1.0, 10.0))
        assert np.array_equal(model.predict(Xk), y)
        P = model.predict_proba(Xk)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        G = gram(KernelConfig(kind, 0.5, 1.0), Xk)
        assert np.linalg.eigvalsh(G).min() >= -1e-8

    rng = np.random.default_rng(2)
    Xl = rng.normal(size=(20, 4))
    yl = rng.integers(0, N_CLASSES, 20)
    W, b = rng.normal(size=(4, N_CLASSES)), rng.normal(size=N_CLASSES)
    _, gW, gb = logreg_loss_and_grad(W, b, Xl, yl, 0.1)
    h = 1e-6
    num = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        num[idx] = (logreg_loss_and_grad(Wp, b, Xl, yl, 0.1)[0]
                    - logreg_loss_and_grad(Wm, b, Xl, yl, 0.1)[0]) / (2 * h)
    assert np.max(np.abs(gW - num)) / max(1.0, np.max(np.abs(num))) <= 1e-5


# ---------------------------------------------------------------- 9

@pytest.mark.criterion(9)
def test_fusion_correctness():
    _, _, regimes = complementary_experts(seed=0)
    experts = dict(regimes["full"])
    experts["expert_e"] = regimes["train"]["expert_a"]
    bundle = ExpertBundle.align(experts)
    assert bundle.M == 5
    assert len(enumerate_subset_averages(bundle)) == 31 == 2 ** 5 - 1

    fused = weighted_average(bundle, WeightMatrix.uniform(bundle.models))
    assert np.array_equal(fused.probs, bundle.P.mean(axis=0))
    for m in range(bundle.M):
        single = weighted_average(bundle, WeightMatrix.one_hot(bundle.models, m))
        assert np.array_equal(single.probs, bundle.P[m])

    small = bundle.subset(bundle.models[:4])
    res = random_search(small, SearchConfig(coarse_samples=300, local_samples=300, seed=1))
    np.testing.assert_allclose(res.weights.W.sum(axis=1), 1.0, rtol=0, atol=1e-9)
    assert np.all(res.weights.W >= 0)


# ---------------------------------------------------------------- 10

@pytest.mark.criterion(10)
def test_fusion_efficacy_on_complementary_experts():
    start = time.perf_counter()
    _, _, regimes = complementary_experts(seed=0)
    cfg = SearchConfig(coarse_samples=2000, local_samples=2000, seed=0)

    fit_train = ExpertBundle.align(regimes["train"])
    res = random_search(fit_train, cfg)
    val = fit_train.select("valid")
    best_single = max(np.mean(np.argmax(val.P[m], axis=1) == val.gold) for m in range(val.M))
    assert res.accuracy >= best_single + 0.10

    valid_from_train = fit_train.select("valid")
    train_from_valid = ExpertBundle.align(regimes["valid"]).select("train")
    swapped = build_swapped_predictions(valid_from_train, train_from_valid)
    all_cfg = replace(cfg, objective_split=None)
    W = random_search(swapped, all_cfg).weights
    test = ExpertBundle.align(regimes["full"]).select("test")
    test_acc = np.mean(weighted_average(test, W).predicted() == test.gold)

    # 2-fold oracle: fit weights on one half, score on the other
    W_a = random_search(train_from_valid, all_cfg).weights
    W_b = random_search(valid_from_train, all_cfg).weights
    hits = (np.sum(weighted_average(valid_from_train, W_a).predicted() == valid_from_train.gold)
            + np.sum(weighted_average(train_from_valid, W_b).predicted() == train_from_valid.gold))
    oracle = hits / (len(valid_from_train) + len(train_from_valid))
    assert abs(test_acc - oracle) <= 0.03
    assert time.perf_counter() - start < 120


# ---------------------------------------------------------------- 11

def _tree_equal(a: Path, b: Path):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(_tree_equal(a / d, b / d) for d in cmp.common_dirs)


def _run_twice(tmp_path, name, args):
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"{name}_t{threads}"
        assert cli_main(args + ["--seed", "7", "--threads", str(threads), "--out", str(out)]) == 0
        outs.append(out)
    assert _tree_equal(*outs), name
    return outs[0]


@pytest.mark.criterion(11)
def test_cli_determinism(tmp_path):
    syn = {}
    for kind in ("complementary", "audio", "mouth", "motion", "descriptors", "tubes"):
        syn[kind] = _run_twice(tmp_path, f"syn_{kind}", ["make-synthetic", "--kind", kind])

    _run_twice(tmp_path, "smooth", ["smooth-tubes", "--tubes", str(syn["tubes"] / "tubes")])
    agg = _run_twice(tmp_path, "agg", ["aggregate", "--frames", str(syn["descriptors"] / "frames.csv")])

    small = tmp_path / "small.json"
    small.write_text('{"audio": {"hidden_sizes": [16, 16, 16], "dbn_epochs": 2, "iterations": 4},'
                     ' "mouth": {"K": 12, "max_iter": 10, "patch_stride": 3},'
                     ' "motion": {"n_blocks": 2700, "block_components": 30, "hidden": 8, "epochs": 3,'
                     ' "sb_components": 10, "K": 10},'
                     ' "search": {"coarse_samples": 200, "local_samples": 200, "n_bags": 3,'
                     ' "scaling_budget": 3}}')
    base = ["--config", str(small)]
    experts = {
        "audio": (syn["audio"] / "features", syn["audio"] / "labels.csv"),
        "mouth": (syn["mouth"] / "frames", syn["mouth"] / "labels.csv"),
        "motion": (syn["motion"] / "frames", syn["motion"] / "labels.csv"),
        "svm-on-descriptors": (agg / "descriptors.csv", syn["descriptors"] / "labels.csv"),
    }
    for name, (data, labels) in experts.items():
        _run_twice(tmp_path, f"train_{name}", ["train-expert", "--expert", name, "--data", str(data),
                                                "--labels", str(labels)] + base)

    comp = syn["complementary"]
    names = ("expert_a", "expert_b", "expert_c", "expert_d")
    spec = sum((["--expert", f"{n}={comp / 'full' / (n + '.csv')}"] for n in names), [])
    swap = sum((["--swap-valid", f"{n}={comp / 'train' / (n + '.csv')}",
                 "--swap-train", f"{n}={comp / 'valid' / (n + '.csv')}"] for n in names), [])
    for strategy in ("mean", "subset-mean", "search", "svm-stack"):
        _run_twice(tmp_path, f"fuse_{strategy}", ["fuse", "--strategy", strategy] + spec + base)
    for strategy in ("search-swapped", "bag"):
        fused = _run_twice(tmp_path, f"fuse_{strategy}", ["fuse", "--strategy", strategy] + spec + swap + base)
    _run_twice(tmp_path, "eval", ["eval", "--predictions", str(fused / "fused.csv"),
                                  "--labels", str(comp / "labels.csv")])
