"""Lloyd's k-means with k-means++ seeding."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _kernels


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray
    objective: tuple = ()
    n_iter: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")

    @property
    def K(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]


def assign(X, centroids, threads=1, chunk=4096):
    """Nearest-centroid labels and squared distances. Row chunks are
    independent, so the result does not depend on ``threads``."""
    X = np.asarray(X, dtype=np.float64)
    if threads <= 1 or len(X) <= chunk:
        return _kernels.assign_nearest(X, centroids)
    parts = [X[s:s + chunk] for s in range(0, len(X), chunk)]
    with ThreadPoolExecutor(threads) as ex:
        res = list(ex.map(lambda p: _kernels.assign_nearest(p, centroids), parts))
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


def kmeans_plus_plus(X, K, rng):
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            raise ValueError(f"fewer than {K} distinct points")
        i = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        i = min(i, n - 1)
        idx.append(i)
        d2 = np.minimum(d2, np.sum((X - X[i]) ** 2, axis=1))
    return X[idx].copy()


def _means(X, labels, K):
    counts = np.bincount(labels, minlength=K)
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums, counts


def kmeans_fit(X, K, seed=0, max_iter=300, threads=1) -> Codebook:
    """Iterates until the assignment stops changing or ``max_iter``. The
    objective after each assignment step is recorded in ``Codebook.objective``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < K:
        raise ValueError(f"need at least K={K} points, got {len(X)}")
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    C = kmeans_plus_plus(X, K, rng)
    labels, d2 = assign(X, C, threads)
    history = [float(d2.sum())]
    it = 0
    while it < max_iter:
        it += 1
        sums, counts = _means(X, labels, K)
        C = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], C)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            # each empty cluster takes the point currently farthest from its centroid
            d2 = np.sum((X - C[labels]) ** 2, axis=1)
            for k in empty:
                far = int(np.argmax(d2))
                C[k] = X[far]
                d2[far] = 0.0
        new_labels, d2 = assign(X, C, threads)
        history.append(float(d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return Codebook(C, tuple(history), it)
