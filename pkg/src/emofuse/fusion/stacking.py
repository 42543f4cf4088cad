"""SVM stacking on concatenated expert outputs, with an optional
per-dimension integer scaling searched over {0, 1, 2, 3}."""

import itertools
from dataclasses import dataclass

import numpy as np

from ..classifiers.grid import GridSearchPlan, two_stage_search
from ..classifiers.kernels import KernelConfig
from ..classifiers.svm import TrainedSVM, svm_train
from ..labels import N_CLASSES, PredictionSet
from .bundle import ExpertBundle

SCALE_LEVELS = (0, 1, 2, 3)


@dataclass(frozen=True)
class ScalingFactors:
    s: np.ndarray   # (7, M) integers

    def __post_init__(self):
        s = np.array(self.s, dtype=np.int64)
        if s.ndim != 2 or s.shape[0] != N_CLASSES:
            raise ValueError(f"scaling factors must have shape ({N_CLASSES}, M)")
        if not np.all(np.isin(s, SCALE_LEVELS)):
            raise ValueError("scaling factors must lie in {0, 1, 2, 3}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @classmethod
    def ones(cls, M):
        return cls(np.ones((N_CLASSES, M), dtype=np.int64))

    @property
    def dims(self):
        return self.s.size

    def column_factors(self):
        """Factors in stacked-feature order (model-major)."""
        return self.s.T.reshape(-1).astype(np.float64)

    def to_json(self):
        return self.s.tolist()


def stack_features(bundle: ExpertBundle, scaling: ScalingFactors = None):
    """``(clips, 7 * M)``: model 0's seven scores, then model 1's, ..."""
    X = np.transpose(bundle.P, (1, 0, 2)).reshape(len(bundle), -1)
    if scaling is not None:
        if scaling.s.shape[1] != bundle.M:
            raise ValueError("scaling factors do not match the number of experts")
        X = X * scaling.column_factors()
    return X


@dataclass(frozen=True)
class StackedSVM:
    models: tuple
    svm: TrainedSVM
    scaling: ScalingFactors = None

    def predict(self, bundle: ExpertBundle) -> PredictionSet:
        if bundle.models != self.models:
            raise ValueError(f"combiner expects experts {self.models}, got {bundle.models}")
        probs = self.svm.predict_proba(stack_features(bundle, self.scaling))
        return PredictionSet(bundle.clip_ids, probs, bundle.gold, bundle.splits)


def holdout_split(n):
    """Deterministic two-way split used for hyperparameter selection."""
    idx = np.arange(n)
    return idx[idx % 2 == 0], idx[idx % 2 == 1]


def svm_stack(train: ExpertBundle, scaling: ScalingFactors = None, config: KernelConfig = None,
              plan: GridSearchPlan = GridSearchPlan(), threads=1) -> StackedSVM:
    """Fit the combiner on ``train`` (which needs gold labels). Without an
    explicit kernel config, the two-stage grid search picks one on an
    even/odd holdout of ``train``, then the final model is refit on all of it."""
    train = train.objective(None)
    X = stack_features(train, scaling)
    y = train.gold
    if config is None:
        a, b = holdout_split(len(y))
        config, _ = two_stage_search(plan, (X[a], y[a]), (X[b], y[b]), threads=threads)
    return StackedSVM(train.models, svm_train(X, y, config), scaling)


def stack_accuracy(train, evaluate, scaling, config):
    model = svm_stack(train, scaling, config)
    pred = model.predict(evaluate)
    return float(np.mean(pred.predicted() == evaluate.gold))


def search_factors(objective, shape, budget, seed=0):
    """Maximise ``objective(ScalingFactors)`` over {0,1,2,3}^(7*M).

    Exhaustive when the space fits in ``budget``; otherwise seeded random
    samples (all-ones first) followed by greedy coordinate refinement of the
    best sample until the budget is spent or a full pass brings no gain.
    Returns ``(best, score, n_evaluated)``; ties keep the earlier candidate.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    D = int(np.prod(shape))
    if len(SCALE_LEVELS) ** D <= budget:
        best, best_score, n = None, -np.inf, 0
        for combo in itertools.product(SCALE_LEVELS, repeat=D):
            cand = ScalingFactors(np.array(combo).reshape(shape))
            score = objective(cand)
            n += 1
            if score > best_score:
                best, best_score = cand, score
        return best, best_score, n
    rng = np.random.default_rng(seed)
    n_random = max(1, budget // 2)
    best = ScalingFactors(np.ones(shape, dtype=np.int64))
    best_score = objective(best)
    n = 1
    while n < n_random:
        cand = ScalingFactors(rng.integers(0, len(SCALE_LEVELS), size=shape))
        score = objective(cand)
        n += 1
        if score > best_score:
            best, best_score = cand, score
    improved = True
    while improved and n < budget:
        improved = False
        for pos in range(D):
            for level in SCALE_LEVELS:
                if n >= budget:
                    break
                flat = best.s.reshape(-1).copy()
                if flat[pos] == level:
                    continue
                flat[pos] = level
                cand = ScalingFactors(flat.reshape(shape))
                score = objective(cand)
                n += 1
                if score > best_score:
                    best, best_score, improved = cand, score, True
    return best, best_score, n


def scaling_search(train: ExpertBundle, evaluate: ExpertBundle, budget, seed=0,
                   config: KernelConfig = None, threads=1):
    """Scaling factors for ``svm_stack`` maximising accuracy on ``evaluate``.
    The kernel config is chosen once, unscaled, and then held fixed."""
    train = train.objective(None)
    evaluate = evaluate.objective(None)
    if config is None:
        config = svm_stack(train, threads=threads).svm.config
    shape = (N_CLASSES, train.M)
    return search_factors(lambda s: stack_accuracy(train, evaluate, s, config), shape, budget, seed)
