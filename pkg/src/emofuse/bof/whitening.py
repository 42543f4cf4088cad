"""PCA whitening with either a retained-variance target or a fixed
component count."""

from dataclasses import dataclass

import numpy as np

EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray
    projection: np.ndarray      # (k, d); row i is the i-th principal axis over sqrt(eigenvalue)
    eigenvalues: np.ndarray     # all d eigenvalues, descending
    mode: str = "variance"

    @property
    def k(self):
        return self.projection.shape[0]

    @property
    def dim(self):
        return self.projection.shape[1]

    @property
    def retained_variance(self):
        ev = np.maximum(self.eigenvalues, 0.0)
        return float(ev[:self.k].sum() / ev.sum()) if ev.sum() > 0 else 1.0

    def to_arrays(self):
        return {"mean": self.mean, "projection": self.projection, "eigenvalues": self.eigenvalues}

    @classmethod
    def from_arrays(cls, arrays, mode="variance"):
        return cls(arrays["mean"], arrays["projection"], arrays["eigenvalues"], mode)


def whiten_fit(X, mode="variance", fraction=0.9, k=None, floor=EIG_FLOOR):
    """Fit on rows of ``X``. ``mode`` is ``"variance"`` (smallest k reaching
    ``fraction`` of the total variance) or ``"fixed"`` (exactly ``k``)."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n <= d:
        raise ValueError(f"need more samples than dimensions to fit whitening ({n} <= {d})")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    vals, vecs = np.linalg.eigh(cov)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    # fix eigenvector signs so the largest-magnitude entry is positive
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(d)])
    vecs = vecs * np.where(flip == 0, 1.0, flip)
    if mode == "variance":
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        pos = np.maximum(vals, 0.0)
        cum = np.cumsum(pos) / max(pos.sum(), np.finfo(float).tiny)
        kk = int(np.searchsorted(cum, fraction - 1e-12) + 1)
    elif mode == "fixed":
        if k is None or not 1 <= k <= d:
            raise ValueError(f"fixed mode needs 1 <= k <= {d}")
        kk = int(k)
    else:
        raise ValueError(f"unknown whitening mode {mode!r}")
    kk = min(kk, d)
    scale = 1.0 / np.sqrt(np.maximum(vals[:kk], floor))
    return WhiteningTransform(mean, vecs[:, :kk].T * scale[:, None], vals, mode)


def whiten_apply(t: WhiteningTransform, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != t.dim:
        raise ValueError(f"dimension mismatch: transform expects {t.dim}, got {X.shape[-1]}")
    return (X - t.mean) @ t.projection.T
