from dataclasses import dataclass

import numpy as np

CHI2_EPS = 1e-12
KINDS = ("rbf", "chi2")


class KernelDomainError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "rbf"
    gamma: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("gamma", "C"):
            v = float(getattr(self, name))
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
            object.__setattr__(self, name, v)


def kernel_eval(cfg: KernelConfig, x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if cfg.kind == "rbf":
        d = x - y
        return float(np.exp(-cfg.gamma * np.dot(d, d)))
    if np.any(x < 0) or np.any(y < 0):
        raise KernelDomainError("chi2 kernel needs non-negative inputs")
    d = x - y
    return float(np.exp(-cfg.gamma * np.sum(d * d / (x + y + CHI2_EPS))))


def _sq_dists(X, Y):
    xx = np.einsum("ij,ij->i", X, X)
    yy = np.einsum("ij,ij->i", Y, Y)
    d = xx[:, None] + yy[None, :] - 2.0 * (X @ Y.T)
    return np.maximum(d, 0.0)


def _chi2_dists(X, Y, chunk=64):
    out = np.empty((X.shape[0], Y.shape[0]))
    for s in range(0, X.shape[0], chunk):
        x = X[s:s + chunk, None, :]
        diff = x - Y[None]
        out[s:s + chunk] = np.sum(diff * diff / (x + Y[None] + CHI2_EPS), axis=2)
    return out


def gram(cfg: KernelConfig, X, Y=None) -> np.ndarray:
    """Kernel matrix between rows of ``X`` and rows of ``Y`` (default ``X``)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    same = Y is None
    Y = X if same else np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if cfg.kind == "rbf":
        D = _sq_dists(X, Y)
    else:
        if np.any(X < 0) or np.any(Y < 0):
            raise KernelDomainError("chi2 kernel needs non-negative inputs")
        D = _chi2_dists(X, Y)
    K = np.exp(-cfg.gamma * D)
    if same:
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K
