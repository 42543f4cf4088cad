"""Two-stage hyperparameter search for kernel classifiers.

The coarse stage scans integer powers of 10 for gamma and C; the fine stage
scans powers of 2 around the coarse optimum. Candidates are ranked by
validation accuracy, ties going to smaller C and then smaller gamma.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import KernelConfig
from .svm import svm_train


@dataclass(frozen=True)
class GridSearchPlan:
    kind: str = "rbf"
    coarse_gamma_exp: tuple = (-2, -1, 0, 1, 2)
    coarse_c_exp: tuple = (-2, -1, 0, 1, 2)
    fine_exp: tuple = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)

    def coarse(self):
        return [KernelConfig(self.kind, 10.0 ** g, 10.0 ** c)
                for g in self.coarse_gamma_exp for c in self.coarse_c_exp]

    def fine(self, center: KernelConfig):
        return [KernelConfig(self.kind, center.gamma * 2.0 ** g, center.C * 2.0 ** c)
                for g in self.fine_exp for c in self.fine_exp]


@dataclass(frozen=True)
class SearchRecord:
    config: KernelConfig
    accuracy: float


def default_trainer(X, y, cfg):
    return svm_train(X, y, cfg)


def _score(trainer, train, valid, cfg):
    model = trainer(train[0], train[1], cfg)
    pred = model.predict(valid[0])
    return float(np.mean(pred == np.asarray(valid[1])))


def grid_search(configs, train, valid, trainer=default_trainer, threads=1):
    """Best config by validation accuracy plus the full evaluation log.

    ``train`` and ``valid`` are ``(X, y)`` pairs; ``trainer(X, y, cfg)``
    returns an object with ``predict``.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("empty hyperparameter grid")
    for name, (X, y) in (("train", train), ("valid", valid)):
        if len(y) == 0:
            raise ValueError(f"empty {name} split")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(lambda c: _score(trainer, train, valid, c), configs))
    else:
        scores = [_score(trainer, train, valid, c) for c in configs]
    records = [SearchRecord(c, s) for c, s in zip(configs, scores)]
    best = min(records, key=lambda r: (-r.accuracy, r.config.C, r.config.gamma))
    return best.config, records


def two_stage_search(plan: GridSearchPlan, train, valid, trainer=default_trainer, threads=1):
    coarse_best, coarse_log = grid_search(plan.coarse(), train, valid, trainer, threads)
    fine_best, fine_log = grid_search(plan.fine(coarse_best), train, valid, trainer, threads)
    both = coarse_log + fine_log
    best = min(both, key=lambda r: (-r.accuracy, r.config.C, r.config.gamma))
    return best.config, both
