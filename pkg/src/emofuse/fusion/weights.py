"""Per-class simplex weights over experts and the weighted average they
define."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import _kernels
from ..container import atomic_write_text
from ..labels import N_CLASSES, PredictionSet
from .bundle import ExpertBundle

ROW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class WeightMatrix:
    W: np.ndarray       # (7, M)
    models: tuple = ()

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != N_CLASSES:
            raise ValueError(f"weights must have shape ({N_CLASSES}, M), got {W.shape}")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite and non-negative")
        dev = np.abs(W.sum(axis=1) - 1.0)
        if np.any(dev > ROW_TOLERANCE):
            raise ValueError(f"row {int(np.argmax(dev))} sums to {W.sum(axis=1)[np.argmax(dev)]!r}, not 1")
        models = tuple(self.models) or tuple(f"m{i}" for i in range(W.shape[1]))
        if len(models) != W.shape[1]:
            raise ValueError("one model name per weight column required")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "models", models)

    @property
    def M(self):
        return self.W.shape[1]

    @classmethod
    def uniform(cls, models):
        M = len(models)
        return cls(np.full((N_CLASSES, M), 1.0 / M), tuple(models))

    @classmethod
    def one_hot(cls, models, m):
        W = np.zeros((N_CLASSES, len(models)))
        W[:, m] = 1.0
        return cls(W, tuple(models))

    def to_json(self):
        return {"models": list(self.models), "weights": self.W.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.array(obj["weights"], dtype=np.float64), tuple(obj["models"]))

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def renormalize_rows(W):
    """Divide each row by its sum; all-zero rows become uniform."""
    W = np.asarray(W, dtype=np.float64)
    s = W.sum(axis=1, keepdims=True)
    return np.where(s > 0, W / np.where(s > 0, s, 1.0), 1.0 / W.shape[1])


def sample_weight_matrix(rng, M, n_classes=N_CLASSES):
    """Rows of M independent uniforms divided by their sum. Rows that come
    out all zero are redrawn."""
    W = rng.random((n_classes, M))
    while True:
        bad = W.sum(axis=1) <= 0
        if not bad.any():
            break
        W[bad] = rng.random((int(bad.sum()), M))
    return W / W.sum(axis=1, keepdims=True)


def _weights_for(bundle, W):
    if isinstance(W, WeightMatrix):
        if W.models and tuple(W.models) != bundle.models and set(W.models) == set(bundle.models):
            W = WeightMatrix(W.W[:, [W.models.index(m) for m in bundle.models]], bundle.models)
        W = W.W
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (N_CLASSES, bundle.M):
        raise ValueError(f"weight matrix has shape {W.shape}, bundle has {bundle.M} models")
    return W


def fused_scores(bundle: ExpertBundle, W):
    W = _weights_for(bundle, W)
    if np.all(W == 1.0 / bundle.M):
        # summing first and dividing once makes uniform weights identical to the plain mean
        return bundle.P.sum(axis=0) / bundle.M
    return _kernels.fuse_scores(bundle.P, W)


def weighted_average(bundle: ExpertBundle, W) -> PredictionSet:
    """Raw per-class weighted scores, flagged as not normalized."""
    return PredictionSet(bundle.clip_ids, fused_scores(bundle, W), bundle.gold, bundle.splits,
                         normalized=False)
