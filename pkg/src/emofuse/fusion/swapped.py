"""Cross-fitted combiner training sets and bagged weight searches."""

from dataclasses import replace

import numpy as np

from ..labels import PredictionSet
from .bundle import ExpertBundle
from .search import SearchConfig, random_search
from .weights import fused_scores


def build_swapped_predictions(valid_from_train: ExpertBundle, train_from_valid: ExpertBundle):
    """Validation-clip predictions of experts fit on the training split,
    followed by training-clip predictions of experts fit on the validation
    split. The result is tagged ``other``."""
    if valid_from_train.models != train_from_valid.models:
        raise ValueError("both halves need the same experts in the same order")
    overlap = set(valid_from_train.clip_ids) & set(train_from_valid.clip_ids)
    if overlap:
        raise ValueError(f"clip {sorted(overlap)[0]!r} appears in both halves")
    return ExpertBundle.concat([valid_from_train, train_from_valid]).with_splits("other")


def bag_seeds(seed, n_bags):
    return [int(s.generate_state(1, dtype=np.uint64)[0])
            for s in np.random.SeedSequence(seed).spawn(n_bags)]


def bag_weighted_averages(search_bundle: ExpertBundle, apply_bundle: ExpertBundle,
                          cfg: SearchConfig = SearchConfig(), n_bags=10, seeds=None, threads=1):
    """Mean of the fused scores of ``n_bags`` independent searches.

    Bag ``i`` searches with ``seeds[i]`` (derived from ``cfg.seed`` when not
    given). Returns the fused PredictionSet on ``apply_bundle`` and the
    per-bag search results.
    """
    if n_bags < 1:
        raise ValueError("n_bags must be >= 1")
    seeds = bag_seeds(cfg.seed, n_bags) if seeds is None else list(seeds)
    if len(seeds) != n_bags:
        raise ValueError("one seed per bag required")
    results = []
    mean = None
    for k, s in enumerate(seeds, start=1):
        res = random_search(search_bundle, replace(cfg, seed=s), threads)
        results.append(res)
        scores = fused_scores(apply_bundle, res.weights)
        # running mean: identical bags reproduce the single-bag scores exactly
        mean = scores if mean is None else mean + (scores - mean) / k
    fused = PredictionSet(apply_bundle.clip_ids, mean, apply_bundle.gold, apply_bundle.splits,
                          normalized=False)
    return fused, results
