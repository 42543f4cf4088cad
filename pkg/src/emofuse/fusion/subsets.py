"""Plain averaging over every non-empty subset of experts."""

import itertools
from dataclasses import dataclass

import numpy as np

from .bundle import ExpertBundle


@dataclass(frozen=True)
class SubsetResult:
    models: tuple
    accuracy: float
    correct: int


def subset_mean(bundle: ExpertBundle, members):
    idx = [bundle.models.index(m) for m in members]
    return bundle.P[idx].mean(axis=0)


def enumerate_subset_averages(bundle: ExpertBundle, objective_split="valid"):
    """All ``2^M - 1`` subsets ranked by accuracy (descending), then by
    size, then by model order."""
    obj = bundle.objective(objective_split)
    results = []
    for size in range(1, bundle.M + 1):
        for combo in itertools.combinations(range(bundle.M), size):
            pred = np.argmax(obj.P[list(combo)].mean(axis=0), axis=1)
            hits = int(np.sum(pred == obj.gold))
            results.append((combo, SubsetResult(tuple(bundle.models[i] for i in combo),
                                                hits / len(obj), hits)))
    results.sort(key=lambda r: (-r[1].correct, len(r[0]), r[0]))
    return [r[1] for r in results]
