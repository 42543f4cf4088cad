"""Random search over per-class simplex weights.

The coarse phase scores uniformly sampled matrices together with the
uniform and one-hot baselines. The local phase perturbs the best matrix so
far with Gaussian noise, rounds to a fixed number of decimals and restores
exact simplexes. Candidates are scored in batches; batch results are merged
in candidate order, so the outcome does not depend on the thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..labels import N_CLASSES
from .bundle import ExpertBundle
from .weights import WeightMatrix, renormalize_rows, sample_weight_matrix


@dataclass(frozen=True)
class SearchConfig:
    coarse_samples: int = 2000
    local_samples: int = 2000
    local_sigma: float = 0.05
    rounding_decimals: int = 2
    seed: int = 0
    objective_split: str = "valid"
    batch: int = 100

    def __post_init__(self):
        if self.coarse_samples < 0 or self.local_samples < 0:
            raise ValueError("sample counts must be >= 0")
        if self.local_sigma < 0:
            raise ValueError("local_sigma must be >= 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass(frozen=True)
class SearchResult:
    weights: WeightMatrix
    accuracy: float
    coarse_accuracy: float
    n_evaluated: int


def score_candidates(bundle: ExpertBundle, Ws, threads=1, chunk=256):
    """Correct-prediction counts for a stack of ``(7, M)`` matrices."""
    Ws = np.ascontiguousarray(Ws, dtype=np.float64).reshape(-1, N_CLASSES, bundle.M)
    if threads <= 1 or len(Ws) <= chunk:
        return _kernels.count_correct(bundle.P, Ws, bundle.gold)
    parts = [Ws[s:s + chunk] for s in range(0, len(Ws), chunk)]
    with ThreadPoolExecutor(threads) as ex:
        counts = list(ex.map(lambda w: _kernels.count_correct(bundle.P, w, bundle.gold), parts))
    return np.concatenate(counts)


def baseline_matrices(M):
    out = [np.full((N_CLASSES, M), 1.0 / M)]
    for m in range(M):
        W = np.zeros((N_CLASSES, M))
        W[:, m] = 1.0
        out.append(W)
    return out


def random_search_coarse(bundle: ExpertBundle, cfg: SearchConfig = SearchConfig(), rng=None,
                         threads=1):
    """Best of the baselines plus ``cfg.coarse_samples`` sampled matrices.
    Ties keep the earliest candidate (baselines first)."""
    obj = bundle.objective(cfg.objective_split)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    cands = baseline_matrices(bundle.M)
    cands += [sample_weight_matrix(rng, bundle.M) for _ in range(cfg.coarse_samples)]
    counts = score_candidates(obj, np.stack(cands), threads)
    best = int(np.argmax(counts))
    return WeightMatrix(cands[best], bundle.models), counts[best] / len(obj), len(cands)


def perturb(W0, rng, sigma, decimals):
    W = np.maximum(W0 + rng.normal(0.0, sigma, W0.shape), 0.0)
    return renormalize_rows(np.round(W, decimals))


def random_search_local(bundle: ExpertBundle, W0, cfg: SearchConfig = SearchConfig(), rng=None,
                        threads=1):
    """Gaussian perturbations around the best matrix so far. The centre
    moves after each batch of ``cfg.batch`` candidates when that batch beat
    it; ``W0`` itself is always in the pool."""
    obj = bundle.objective(cfg.objective_split)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    W0 = W0.W if isinstance(W0, WeightMatrix) else np.asarray(W0, dtype=np.float64)
    best_W = W0
    best = int(score_candidates(obj, W0[None])[0])
    left = cfg.local_samples
    while left > 0:
        n = min(cfg.batch, left)
        left -= n
        cands = np.stack([perturb(best_W, rng, cfg.local_sigma, cfg.rounding_decimals)
                          for _ in range(n)])
        counts = score_candidates(obj, cands, threads)
        i = int(np.argmax(counts))
        if counts[i] > best:
            best, best_W = int(counts[i]), cands[i]
    return WeightMatrix(best_W, bundle.models), best / len(obj)


def random_search(bundle: ExpertBundle, cfg: SearchConfig = SearchConfig(), threads=1) -> SearchResult:
    """Coarse phase followed by the local phase, from one seeded stream."""
    rng = np.random.default_rng(cfg.seed)
    W, coarse_acc, n = random_search_coarse(bundle, cfg, rng, threads)
    W, acc = random_search_local(bundle, W, cfg, rng, threads)
    return SearchResult(W, acc, coarse_acc, n + cfg.local_samples + 1)
