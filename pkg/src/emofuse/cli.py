"""Command-line driver.

Every command takes ``--seed`` (or a ``seed`` in the JSON config), writes
its outputs under ``--out`` and finishes with ``report.json``. Exit codes:
0 success, 1 internal error, 2 input or configuration error. A failed run
leaves ``<out>/.failed`` holding the error message.
"""

import argparse
import copy
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import build_descriptor, descriptors_to_csv_text, read_descriptors, read_frame_probabilities
from .container import atomic_write_text, dump_json, read_feature_dir, write_feature_matrix
from .labels import (EMOTIONS, N_CLASSES, NORMALIZED_TOLERANCE, PredictionSet, confusion,
                     read_labels, read_predictions, write_labels, write_predictions)

log = logging.getLogger("emofuse")

PRESETS = {
    "desk": {
        "smoothing": {"window": 11, "slope_threshold": 1.5, "output_size": 48},
        "audio": {"hidden_sizes": [128, 128, 128], "learning_rates": [0.0006, 0.0005, 0.001],
                  "rbm_l2": [2e-3, 2e-4, 2e-4], "dbn_epochs": 15, "batch_size": 32,
                  "iterations": 100, "clip_drop": 0.12, "hidden_drop": 0.121, "feature_drop": 0.4,
                  "eps0": 0.0005, "mu": 0.46, "rho": 0.92, "l2": 1e-5, "patience": None,
                  "N": 2, "train_weights": [1.4, 0.6], "test_weights": [1.3, 0.7]},
        "mouth": {"K": 100, "variance": 0.9, "pool": "mean", "max_iter": 100,
                  "max_kmeans_points": 20000, "l2": 1e-3, "patch_stride": 1},
        "motion": {"n_blocks": 20000, "block_components": 300, "hidden": 64, "lr": 1e-4,
                   "momentum": 0.9, "epochs": 50, "sb_components": 100, "K": 300, "max_iter": 300},
        "svm": {"kind": "rbf"},
        "search": {"coarse_samples": 2000, "local_samples": 2000, "local_sigma": 0.05,
                   "rounding_decimals": 2, "batch": 100, "n_bags": 10, "scaling_budget": 50},
    },
}
PRESETS["paper"] = copy.deepcopy(PRESETS["desk"])
PRESETS["paper"]["audio"].update(hidden_sizes=[350, 350, 350], iterations=500)
PRESETS["paper"]["mouth"].update(K=400, max_iter=300, max_kmeans_points=200000)
PRESETS["paper"]["motion"].update(n_blocks=200000, hidden=300, epochs=1000, K=3000)
PRESETS["paper"]["search"].update(n_bags=350, scaling_budget=500)

COMMAND_BLOCKS = {
    "smooth-tubes": ("smoothing",),
    "aggregate": (),
    "train-expert": ("audio", "mouth", "motion", "svm"),
    "fuse": ("search", "svm"),
    "eval": (),
    "make-synthetic": (),
}


class InputError(ValueError):
    """Bad input files or configuration (exit code 2)."""


# ---------------------------------------------------------------- plumbing

def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _digest_path(path: Path, h):
    if path.is_dir():
        for p in sorted(q for q in path.rglob("*") if q.is_file()):
            h.update(str(p.relative_to(path)).encode())
            h.update(p.read_bytes())
    elif path.is_file():
        h.update(path.read_bytes())


def _require(path, kind="file"):
    p = Path(path)
    if kind == "file" and not p.is_file():
        raise InputError(f"{p}: no such file")
    if kind == "dir" and not p.is_dir():
        raise InputError(f"{p}: no such directory")
    if kind == "any" and not p.exists():
        raise InputError(f"{p}: no such file or directory")
    return p


class Run:
    """Effective configuration and report for one command invocation."""

    def __init__(self, args):
        self.args = args
        self.command = args.command
        cfg = {}
        if args.config:
            path = _require(args.config)
            try:
                cfg = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON ({exc})") from None
            if not isinstance(cfg, dict):
                raise InputError(f"{path}: config must be a JSON object")
        preset = args.preset or cfg.get("preset", "desk")
        if preset not in PRESETS:
            raise InputError(f"unknown preset {preset!r}")
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise InputError("a seed is required (--seed or \"seed\" in the config)")
        if not isinstance(seed, int) or seed < 0:
            raise InputError("seed must be a non-negative integer")
        self.seed = seed
        self.preset = preset
        self.threads = max(1, args.threads if args.threads is not None else int(cfg.get("threads", 1)))
        params = {b: PRESETS[preset][b] for b in COMMAND_BLOCKS[self.command]}
        params = _merge(params, {b: cfg[b] for b in params if b in cfg})
        for b, block in params.items():
            unknown = set(block) - set(PRESETS[preset][b])
            if unknown:
                raise InputError(f"unknown {b} parameter(s): {sorted(unknown)}")
        self.params = params
        self.out = Path(args.out)
        self.inputs = {}
        self.report = {"command": self.command, "seed": seed, "preset": preset,
                       "accuracy": {}, "confusion": {}, "wall_time": None}
        self.started = time.perf_counter()

    def input(self, name, path, kind="file"):
        p = _require(path, kind)
        self.inputs[name] = p
        return p

    def override(self, block, **values):
        for k, v in values.items():
            if v is not None:
                self.params[block][k] = v

    def config_hash(self):
        h = hashlib.sha256()
        h.update(json.dumps({"command": self.command, "seed": self.seed, "preset": self.preset,
                             "params": self.params, "options": _hashed_options(self.args)},
                            sort_keys=True).encode())
        for name in sorted(self.inputs):
            h.update(name.encode())
            _digest_path(self.inputs[name], h)
        return h.hexdigest()

    def evaluate(self, preds: PredictionSet, prefix=""):
        """Accuracy and confusion for every split that carries gold labels."""
        for split in sorted(set(preds.splits)):
            sub = preds.select(split)
            if len(sub) and sub.has_gold:
                cm = confusion(sub)
                self.report["accuracy"][prefix + split] = cm.accuracy()
                self.report["confusion"][prefix + split] = cm.counts.tolist()

    def finish(self):
        self.report["config_hash"] = self.config_hash()
        if self.args.record_time:
            self.report["wall_time"] = round(time.perf_counter() - self.started, 3)
        write_report(self.report, self.out / "report.json")


def _hashed_options(args):
    """Command options that shape the result. Input paths are left out
    (their contents are digested instead); expert specs keep only names."""
    skip = {"config", "seed", "threads", "preset", "out", "record_time", "verbose", "func"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip or k in _PATH_OPTIONS:
            continue
        if k in _SPEC_OPTIONS or (k == "expert" and isinstance(v, list)):
            v = [spec.partition("=")[0] for spec in v or ()]
        out[k] = v
    return out


_PATH_OPTIONS = {"tubes", "frames", "data", "labels", "predictions"}
_SPEC_OPTIONS = {"swap_valid", "swap_train"}


def write_report(report, path):
    dump_json(report, path)


def read_report(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_normalized(preds: PredictionSet, path):
    """Raw fused scores are divided by their row sums before writing;
    rows that already sum to 1 are written unchanged."""
    s = preds.probs.sum(axis=1)
    if len(preds) and np.max(np.abs(s - 1.0)) > NORMALIZED_TOLERANCE:
        preds = preds.normalize()
    elif not preds.normalized:
        preds = PredictionSet(preds.clip_ids, preds.probs, preds.gold, preds.splits, True)
    write_predictions(preds, path)


# ---------------------------------------------------------------- smooth-tubes

def cmd_smooth_tubes(run: Run):
    from .facetube import (FacetubeError, SmoothingConfig, crop_facetube, read_pgm_sequence,
                           read_tube_csv, stabilize_tube, write_pgm, write_tube_csv)

    a = run.args
    run.override("smoothing", window=a.window, slope_threshold=a.slope_threshold)
    src = run.input("tubes", a.tubes, "any")
    files = sorted(src.glob("*.csv")) if src.is_dir() else [src]
    if not files:
        raise InputError(f"{src}: no tube CSV files")
    try:
        cfg = SmoothingConfig(**run.params["smoothing"])
    except FacetubeError as exc:
        raise InputError(str(exc)) from None
    frames = read_pgm_sequence(run.input("frames", a.frames, "dir")) if a.frames else None
    n_crops = 0
    for f in files:
        tube = stabilize_tube(read_tube_csv(f), cfg)
        write_tube_csv(tube, run.out / "tubes" / f.name)
        if frames is not None:
            clip_frames = frames.get(f.stem)
            if clip_frames is None:
                raise InputError(f"{a.frames}: no frames for clip {f.stem!r}")
            for (idx, _), crop in zip(tube.frames, crop_facetube(clip_frames, tube, cfg)):
                write_pgm(run.out / "crops" / f"{f.stem}_{idx}.pgm", crop)
                n_crops += 1
    run.report["tubes"] = len(files)
    run.report["crops"] = n_crops


# ---------------------------------------------------------------- aggregate

def cmd_aggregate(run: Run):
    seqs = read_frame_probabilities(run.input("frames", run.args.frames))
    items = [(s.clip_id, build_descriptor(s)) for s in seqs]
    atomic_write_text(run.out / "descriptors.csv", descriptors_to_csv_text(items))
    run.report["clips"] = len(items)
    run.report["frames"] = {s.clip_id: len(s) for s in seqs}


# ---------------------------------------------------------------- train-expert

def _labels_for(run, ids):
    labels = read_labels(run.input("labels", run.args.labels))
    missing = [c for c in ids if c not in labels]
    if missing:
        raise InputError(f"{run.args.labels}: no label row for clip {missing[0]!r}")
    return labels


def _split_ids(labels, ids, splits):
    return [c for c in ids if labels[c][0] in splits]


def _roles(run, ids, labels):
    """Fit clips, selection clips and the clips to predict."""
    fit = set(run.args.fit.split("+"))
    fit_ids = [c for c in ids if labels[c][0] in fit]
    if run.args.select == "none":
        sel_ids = fit_ids[4::5]
        fit_ids = [c for c in fit_ids if c not in set(sel_ids)]
    else:
        sel_ids = _split_ids(labels, ids, {run.args.select})
    want = run.args.splits.split(",")
    out_ids = [c for c in ids if labels[c][0] in want]
    for name, group in (("fit", fit_ids), ("selection", sel_ids)):
        if not group:
            raise InputError(f"no clips in the {name} split")
        if any(labels[c][1] < 0 for c in group):
            raise InputError(f"{name} clips need gold labels")
    return fit_ids, sel_ids, out_ids


def _prediction_set(ids, probs, labels):
    return PredictionSet(tuple(ids), probs, [labels[c][1] for c in ids],
                         tuple(labels[c][0] for c in ids))


def _write_split_predictions(run, preds: PredictionSet):
    for split in sorted(set(preds.splits)):
        write_predictions(preds.select(split), run.out / f"predictions_{split}.csv")
    run.evaluate(preds)
    run.report["predicted_clips"] = len(preds)


def _train_audio(run, seeds):
    from .audio import (DBNConfig, FeatureSequence, FinetuneConfig, FinetuneLog, MLPWithPooling,
                        PoolingConfig, finetune, pretrain_dbn)

    p = run.params["audio"]
    feats = read_feature_dir(run.input("data", run.args.data, "dir"))
    if not feats:
        raise InputError(f"{run.args.data}: no feature matrices")
    ids = sorted(feats)
    labels = _labels_for(run, ids)
    fit_ids, sel_ids, out_ids = _roles(run, ids, labels)
    seqs = {c: FeatureSequence(c, feats[c]) for c in ids}
    mean = np.concatenate([seqs[c].A for c in fit_ids]).mean(axis=0)
    centred = {c: FeatureSequence(c, seqs[c].A - mean) for c in ids}
    rng = np.random.default_rng(seeds[0])
    dbn = DBNConfig(tuple(p["hidden_sizes"]), tuple(p["learning_rates"]), tuple(p["rbm_l2"]),
                    p["dbn_epochs"], p["batch_size"])
    layers = pretrain_dbn(dbn, np.concatenate([centred[c].A for c in fit_ids]), rng)
    pooling = PoolingConfig(p["N"], tuple(p["train_weights"]), tuple(p["test_weights"]))
    mlp = MLPWithPooling.from_dbn(layers, rng, pooling=pooling, hidden_drop=p["hidden_drop"],
                                  feature_drop=p["feature_drop"])
    ft = FinetuneConfig(p["iterations"], p["clip_drop"], p["l2"], p["eps0"], p["mu"], p["rho"],
                        patience=p["patience"])
    flog = FinetuneLog()
    y = lambda group: [labels[c][1] for c in group]
    best = finetune(mlp, [centred[c] for c in fit_ids], y(fit_ids), [centred[c] for c in sel_ids],
                    y(sel_ids), np.random.default_rng(seeds[1]), ft, flog)
    from dataclasses import replace
    model = replace(best, offset=mean)
    model.save(run.out / "model")
    probs = np.stack([model.forward(seqs[c].A) for c in out_ids]) if out_ids else np.zeros((0, N_CLASSES))
    run.report["best_iteration"] = flog.best_iteration
    return _prediction_set(out_ids, probs, labels)


def _videos_from_pgm(run):
    from .facetube import read_pgm_sequence

    frames = read_pgm_sequence(run.input("data", run.args.data, "dir"))
    if not frames:
        raise InputError(f"{run.args.data}: no <clip>_<frame>.pgm files")
    return {c: [fr[k] for k in sorted(fr)] for c, fr in frames.items()}


def _train_mouth(run, seeds):
    from .bof import MouthConfig, RegionGrid, bag_of_mouth_predict, bag_of_mouth_train

    p = run.params["mouth"]
    videos = _videos_from_pgm(run)
    ids = sorted(videos)
    labels = _labels_for(run, ids)
    fit_ids, _, out_ids = _roles(run, ids, labels)
    cfg = MouthConfig(grid=RegionGrid(stride=p["patch_stride"]), K=p["K"], variance=p["variance"],
                      pool=p["pool"], max_iter=p["max_iter"],
                      max_kmeans_points=p["max_kmeans_points"], l2=p["l2"])
    imgs = [f for c in fit_ids for f in videos[c]]
    ys = [labels[c][1] for c in fit_ids for _ in videos[c]]
    model = bag_of_mouth_train(imgs, ys, cfg, seed=int(seeds[0].generate_state(1)[0]),
                               threads=run.threads)
    model.save(run.out / "model")
    probs = [bag_of_mouth_predict(model, videos[c], run.threads).p for c in out_ids]
    return _prediction_set(out_ids, np.array(probs).reshape(len(out_ids), N_CLASSES), labels)


def _svm_with_search(run, X_fit, y_fit, X_sel, y_sel, kind):
    from .classifiers import GridSearchPlan, svm_train, two_stage_search

    best, records = two_stage_search(GridSearchPlan(kind=kind), (X_fit, y_fit), (X_sel, y_sel),
                                     threads=run.threads)
    run.report["svm"] = {"kind": kind, "gamma": best.gamma, "C": best.C,
                         "grid_points": len(records)}
    return svm_train(X_fit, y_fit, best)


def _train_motion(run, seeds):
    from .bof import MotionConfig, motion_features_train

    p = run.params["motion"]
    videos = {c: np.stack(v) for c, v in _videos_from_pgm(run).items()}
    ids = sorted(videos)
    labels = _labels_for(run, ids)
    fit_ids, sel_ids, out_ids = _roles(run, ids, labels)
    feats = motion_features_train([videos[c] for c in fit_ids], MotionConfig(**p),
                                  seed=int(seeds[0].generate_state(1)[0]), threads=run.threads)
    feats.save(run.out / "features")
    H = {c: feats.histogram(videos[c]) for c in ids}
    stack = lambda group: np.array([H[c] for c in group])
    y = lambda group: np.array([labels[c][1] for c in group])
    svm = _svm_with_search(run, stack(fit_ids), y(fit_ids), stack(sel_ids), y(sel_ids), "chi2")
    svm.save(run.out / "model")
    probs = svm.predict_proba(stack(out_ids)) if out_ids else np.zeros((0, N_CLASSES))
    return _prediction_set(out_ids, probs, labels)


def _train_descriptor_svm(run, seeds):
    ids, X = read_descriptors(run.input("data", run.args.data))
    labels = _labels_for(run, ids)
    fit_ids, sel_ids, out_ids = _roles(run, ids, labels)
    row = {c: i for i, c in enumerate(ids)}
    sub = lambda group: X[[row[c] for c in group]]
    y = lambda group: np.array([labels[c][1] for c in group])
    svm = _svm_with_search(run, sub(fit_ids), y(fit_ids), sub(sel_ids), y(sel_ids),
                           run.params["svm"]["kind"])
    svm.save(run.out / "model")
    probs = svm.predict_proba(sub(out_ids)) if out_ids else np.zeros((0, N_CLASSES))
    return _prediction_set(out_ids, probs, labels)


EXPERTS = {"audio": _train_audio, "mouth": _train_mouth, "motion": _train_motion,
           "svm-on-descriptors": _train_descriptor_svm}


def cmd_train_expert(run: Run):
    seeds = np.random.SeedSequence(run.seed).spawn(4)
    preds = EXPERTS[run.args.expert](run, seeds)
    run.report["expert"] = run.args.expert
    _write_split_predictions(run, preds)


# ---------------------------------------------------------------- fuse

def _parse_experts(run, specs, role):
    from .fusion import ExpertBundle

    if not specs:
        raise InputError(f"at least one --{role} NAME=CSV is required")
    experts = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise InputError(f"--{role} expects NAME=CSV, got {spec!r}")
        if name in experts:
            raise InputError(f"expert {name!r} given twice for --{role}")
        experts[name] = read_predictions(run.input(f"{role}:{name}", path))
    bundle = ExpertBundle.align(experts)
    if run.args.labels:
        labels = read_labels(run.input("labels", run.args.labels))
        bundle = bundle.with_gold({c: g for c, (_, g) in labels.items()})
    return bundle


def _search_config(run, objective):
    from .fusion import SearchConfig

    p = run.params["search"]
    return SearchConfig(p["coarse_samples"], p["local_samples"], p["local_sigma"],
                        p["rounding_decimals"], run.seed, objective, p["batch"])


def _swapped_bundle(run, models):
    from .fusion import build_swapped_predictions

    a = run.args
    if not a.swap_valid or not a.swap_train:
        raise InputError("swapped search needs both --swap-valid and --swap-train")
    valid_part = _parse_experts(run, a.swap_valid, "swap-valid")
    train_part = _parse_experts(run, a.swap_train, "swap-train")
    if valid_part.models != models or train_part.models != models:
        raise InputError("swapped prediction sets must name the same experts in the same order")
    # files covering every split contribute only the half they were not fit on
    if "valid" in valid_part.splits:
        valid_part = valid_part.select("valid")
    if "train" in train_part.splits:
        train_part = train_part.select("train")
    return build_swapped_predictions(valid_part, train_part)


def cmd_fuse(run: Run):
    from .fusion import (WeightMatrix, bag_weighted_averages, enumerate_subset_averages,
                         random_search, scaling_search, svm_stack, weighted_average)
    from .fusion.stacking import holdout_split

    a = run.args
    bundle = _parse_experts(run, a.expert, "expert")
    objective = a.objective
    strategy = a.strategy
    run.report["strategy"] = strategy
    run.report["models"] = list(bundle.models)
    if strategy == "mean":
        fused = weighted_average(bundle, WeightMatrix.uniform(bundle.models))
    elif strategy == "subset-mean":
        ranked = enumerate_subset_averages(bundle, objective)
        listing = [{"models": list(r.models), "accuracy": r.accuracy} for r in ranked]
        dump_json(listing, run.out / "subsets.json")
        run.report["subsets_evaluated"] = len(listing)
        run.report["best_subset"] = listing[0]
        fused = weighted_average(bundle.subset(ranked[0].models),
                                 WeightMatrix.uniform(ranked[0].models))
    elif strategy in ("search", "search-swapped"):
        if strategy == "search":
            res = random_search(bundle, _search_config(run, objective), run.threads)
        else:
            res = random_search(_swapped_bundle(run, bundle.models), _search_config(run, None),
                                run.threads)
        res.weights.save(run.out / "weights.json")
        run.report["search"] = {"objective_accuracy": res.accuracy,
                                "coarse_accuracy": res.coarse_accuracy, "evaluated": res.n_evaluated}
        fused = weighted_average(bundle, res.weights)
    elif strategy == "bag":
        n_bags = run.params["search"]["n_bags"]
        if a.swap_valid or a.swap_train:
            source, cfg = _swapped_bundle(run, bundle.models), _search_config(run, None)
        else:
            source, cfg = bundle, _search_config(run, objective)
        fused, results = bag_weighted_averages(source, bundle, cfg, n_bags, threads=run.threads)
        dump_json({"models": list(bundle.models),
                   "bags": [r.weights.W.tolist() for r in results]}, run.out / "weights.json")
        run.report["bags"] = {"n_bags": n_bags,
                              "objective_accuracy": [r.accuracy for r in results]}
    elif strategy == "svm-stack":
        train = bundle.objective(objective)
        budget = run.params["search"]["scaling_budget"]
        scaling = None
        if budget > 0:
            first, second = holdout_split(len(train))
            scaling, score, n = scaling_search(train.take(first), train.take(second), budget,
                                               run.seed, threads=run.threads)
            run.report["scaling"] = {"factors": scaling.to_json(), "holdout_accuracy": score,
                                     "evaluated": n}
        model = svm_stack(train, scaling, threads=run.threads)
        model.svm.save(run.out / "model")
        cfg = model.svm.config
        run.report["svm"] = {"kind": cfg.kind, "gamma": cfg.gamma, "C": cfg.C}
        fused = model.predict(bundle)
    else:  # argparse restricts the choices
        raise InputError(f"unknown strategy {strategy!r}")
    _write_normalized(fused, run.out / "fused.csv")
    run.evaluate(fused)


# ---------------------------------------------------------------- eval

def write_confusion_csv(counts, path):
    lines = ["gold\\predicted," + ",".join(EMOTIONS)]
    for e, row in zip(EMOTIONS, counts):
        lines.append(",".join([e] + [str(int(v)) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_eval(run: Run):
    preds = read_predictions(run.input("predictions", run.args.predictions))
    labels = read_labels(run.input("labels", run.args.labels))
    pred_ids, label_ids = set(preds.clip_ids), set(labels)
    if pred_ids != label_ids:
        diff = sorted(pred_ids ^ label_ids)
        raise InputError(f"prediction and label clip sets differ ({len(diff)} clips, e.g. {diff[0]!r})")
    gold = [labels[c][1] for c in preds.clip_ids]
    preds = PredictionSet(preds.clip_ids, preds.probs, gold,
                          tuple(labels[c][0] for c in preds.clip_ids), preds.normalized)
    run.evaluate(preds)
    everything = preds.with_split("other")
    if everything.has_gold:
        cm = confusion(everything)
        run.report["accuracy"]["all"] = cm.accuracy()
        run.report["confusion"]["all"] = cm.counts.tolist()
    for split, counts in run.report["confusion"].items():
        write_confusion_csv(counts, run.out / f"confusion_{split}.csv")


# ---------------------------------------------------------------- make-synthetic

def _write_label_file(path, ids, ys, splits):
    write_labels({c: (s, int(y)) for c, y, s in zip(ids, ys, splits)}, path)


def _cycle_splits(ys):
    """Deal each class's clips into train, valid, test, train, ... in turn."""
    pattern = ("train", "valid", "test", "train")
    seen = {}
    out = []
    for y in ys:
        k = seen.get(int(y), 0)
        seen[int(y)] = k + 1
        out.append(pattern[k % len(pattern)])
    return out


def cmd_make_synthetic(run: Run):
    from . import synthetic
    from .facetube import FaceTube, write_pgm, write_tube_csv

    kind, out, seed = run.args.kind, run.out, run.seed
    if kind == "complementary":
        labels, splits, regimes = synthetic.complementary_experts(seed=seed)
        for regime, experts in regimes.items():
            for name, preds in experts.items():
                write_predictions(preds, out / regime / f"{name}.csv")
        write_labels({c: (splits[c], g) for c, g in labels.items()}, out / "labels.csv")
        run.report["clips"] = len(labels)
    elif kind == "audio":
        ids, mats, ys = synthetic.audio_sequences(seed=seed)
        for c, A in zip(ids, mats):
            write_feature_matrix(out / "features", c, A)
        _write_label_file(out / "labels.csv", ids, ys, _cycle_splits(ys))
        run.report["clips"] = len(ids)
    elif kind in ("mouth", "motion"):
        if kind == "mouth":
            ids, videos, ys = synthetic.mouth_faces(seed=seed)
        else:
            ids, videos, ys = synthetic.motion_videos(seed=seed)
        for c, frames in zip(ids, videos):
            for t, img in enumerate(frames):
                write_pgm(out / "frames" / f"{c}_{t}.pgm", img)
        _write_label_file(out / "labels.csv", ids, ys, _cycle_splits(ys))
        run.report["clips"] = len(ids)
    elif kind == "descriptors":
        from .aggregation import FrameProbabilitySequence, write_frame_probabilities

        ids, seqs, ys = synthetic.frame_probabilities(seed=seed)
        write_frame_probabilities([FrameProbabilitySequence(c, r) for c, r in zip(ids, seqs)],
                                  out / "frames.csv")
        _write_label_file(out / "labels.csv", ids, ys, _cycle_splits(ys))
        run.report["clips"] = len(ids)
    elif kind == "tubes":
        for i in range(3):
            coords = synthetic.jittered_tube(seed=seed + i, drift=0.5 * i)
            write_tube_csv(FaceTube.from_coords(range(len(coords)), coords), out / "tubes" / f"t{i}.csv")
        run.report["clips"] = 3
    else:
        raise InputError(f"unknown synthetic kind {kind!r}")


# ---------------------------------------------------------------- entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its fields")
    common.add_argument("--seed", type=int, help="global seed (required here or in the config)")
    common.add_argument("--threads", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="parameter preset (default desk)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--record-time", action="store_true", help="store wall time in the report")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="emofuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smooth-tubes", parents=[common], help="smooth and square face tracks")
    p.add_argument("--tubes", required=True, help="tube CSV or directory of tube CSVs")
    p.add_argument("--frames", help="directory of <clip>_<frame>.pgm frames to crop")
    p.add_argument("--window", type=int)
    p.add_argument("--slope-threshold", type=float)
    p.set_defaults(func=cmd_smooth_tubes)

    p = sub.add_parser("aggregate", parents=[common], help="per-frame scores -> 70-dim clip descriptors")
    p.add_argument("--frames", required=True, help="per-frame probability CSV")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train-expert", parents=[common], help="train one expert and predict")
    p.add_argument("--expert", required=True, choices=sorted(EXPERTS))
    p.add_argument("--data", required=True, help="features directory, frame directory or descriptor CSV")
    p.add_argument("--labels", required=True, help="clip_id,split,gold CSV")
    p.add_argument("--fit", default="train", help="split(s) to fit on, joined by '+' (default train)")
    p.add_argument("--select", default="valid",
                   help="split for model selection, or 'none' for a holdout of the fit clips")
    p.add_argument("--splits", default="train,valid,test", help="splits to predict")
    p.set_defaults(func=cmd_train_expert)

    p = sub.add_parser("fuse", parents=[common], help="combine expert predictions")
    p.add_argument("--strategy", required=True,
                   choices=["mean", "subset-mean", "svm-stack", "search", "search-swapped", "bag"])
    p.add_argument("--expert", action="append", metavar="NAME=CSV",
                   help="predictions to fuse (repeat per expert)")
    p.add_argument("--swap-valid", action="append", metavar="NAME=CSV",
                   help="validation predictions of experts fit on the training split")
    p.add_argument("--swap-train", action="append", metavar="NAME=CSV",
                   help="training predictions of experts fit on the validation split")
    p.add_argument("--objective", default="valid", help="split the combiner is optimised on")
    p.add_argument("--labels", help="optional clip_id,split,gold CSV supplying gold labels")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", parents=[common], help="accuracy and confusion of a prediction CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("make-synthetic", parents=[common], help="write a seeded synthetic dataset")
    p.add_argument("--kind", required=True,
                   choices=["complementary", "audio", "mouth", "motion", "descriptors", "tubes"])
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def _mark_failed(out, message):
    try:
        atomic_write_text(Path(out) / ".failed", message + "\n")
    except OSError:
        pass


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = Run(args)
        args.func(run)
        run.finish()
    except (ValueError, KeyError, OSError) as exc:
        msg = str(exc) if not isinstance(exc, KeyError) else exc.args[0] if exc.args else repr(exc)
        print(f"emofuse {args.command}: error: {msg}", file=sys.stderr)
        _mark_failed(args.out, f"input error: {msg}")
        return 2
    except Exception as exc:  # noqa: BLE001 - reported and mapped to exit code 1
        log.debug("internal error", exc_info=True)
        print(f"emofuse {args.command}: internal error: {exc!r}", file=sys.stderr)
        _mark_failed(args.out, f"internal error: {exc!r}")
        return 1
    stale = Path(args.out) / ".failed"
    if stale.exists():
        stale.unlink()
    return 0


if __name__ == "__main__":
    sys.exit(main())
