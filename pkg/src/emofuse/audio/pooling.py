"""Top-N temporal pooling.

Each feature column is sorted over time and its N largest values are
averaged with fixed weights ``w`` that sum to N:
``F_j = (1/N) * sum_i w_i * (i-th largest of column j)``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PoolingConfig:
    N: int = 2
    train_weights: tuple = (1.4, 0.6)
    test_weights: tuple = (1.3, 0.7)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        for w in (self.train_weights, self.test_weights):
            if len(w) != self.N:
                raise ValueError(f"need {self.N} pooling weights, got {len(w)}")
            if abs(sum(w) - self.N) > 1e-9:
                raise ValueError(f"pooling weights must sum to N={self.N}, got {sum(w)}")

    def weights(self, mode):
        if mode == "train":
            return np.asarray(self.train_weights, dtype=np.float64)
        if mode == "test":
            return np.asarray(self.test_weights, dtype=np.float64)
        raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")


def _effective_weights(cfg, mode, d_t):
    w = cfg.weights(mode)
    n = min(cfg.N, d_t)
    if n < cfg.N:
        w = w[:n] * (n / w[:n].sum())
    return w, n


def _topn_index(A, n):
    # stable sort of -A keeps the earliest timestep first among ties
    return np.argsort(-A, axis=0, kind="stable")[:n]


def topn_pool(A, cfg: PoolingConfig = PoolingConfig(), mode="test"):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] < 1:
        raise ValueError("need at least one timestep")
    w, n = _effective_weights(cfg, mode, A.shape[0])
    idx = _topn_index(A, n)
    top = np.take_along_axis(A, idx, axis=0)
    return (w[:, None] * top).sum(axis=0) / n


def topn_pool_backward(A, upstream, cfg: PoolingConfig = PoolingConfig(), mode="train"):
    """Gradient of ``topn_pool`` w.r.t. ``A``: ``w_i / N'`` routed to the
    position of each column's i-th largest value."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (A.shape[1],):
        raise ValueError(f"upstream gradient must have shape ({A.shape[1]},)")
    w, n = _effective_weights(cfg, mode, A.shape[0])
    idx = _topn_index(A, n)
    grad = np.zeros_like(A)
    cols = np.arange(A.shape[1])
    for i in range(n):
        grad[idx[i], cols] += (w[i] / n) * upstream
    return grad
