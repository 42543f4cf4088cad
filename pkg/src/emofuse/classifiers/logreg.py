"""L2-regularised multinomial logistic regression by full-batch gradient
descent with Armijo backtracking."""

from dataclasses import dataclass

import numpy as np

from ..container import load_container, save_container
from ..labels import N_CLASSES, softmax


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogisticModel:
    W: np.ndarray  # (features, 7)
    b: np.ndarray  # (7,)
    l2: float
    n_iter: int = 0
    grad_norm: float = float("nan")

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.W.shape[0]:
            raise ValueError(f"dimension mismatch: model has {self.W.shape[0]} features, input has {X.shape[1]}")
        return softmax(X @ self.W + self.b, axis=1)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, directory):
        save_container(directory, {"model": "logreg", "l2": self.l2, "n_iter": self.n_iter},
                       {"W": self.W, "b": self.b})

    @classmethod
    def load(cls, directory):
        header, arrays = load_container(directory)
        return cls(arrays["W"], arrays["b"], header["l2"], header.get("n_iter", 0))


def loss_and_grad(W, b, X, y, l2):
    """Mean cross-entropy plus ``l2 / 2 * ||W||^2``; the bias is not penalised."""
    n = X.shape[0]
    Z = X @ W + b
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    loss = float(np.mean(logsum - Z[np.arange(n), y]) + 0.5 * l2 * np.sum(W * W))
    P = np.exp(Z - logsum[:, None])
    P[np.arange(n), y] -= 1.0
    P /= n
    return loss, X.T @ P + l2 * W, P.sum(axis=0)


def logreg_train(X, y, l2=1e-3, tol=1e-5, max_iter=2000, step=1.0, n_classes=N_CLASSES,
                 callback=None) -> LogisticModel:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).ravel()
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    W = np.zeros((X.shape[1], n_classes))
    b = np.zeros(n_classes)
    loss, gW, gb = loss_and_grad(W, b, X, y, l2)
    it = 0
    gnorm = float(np.sqrt(np.sum(gW * gW) + np.sum(gb * gb)))
    while it < max_iter and gnorm > tol:
        g2 = gnorm * gnorm
        t = step
        while True:
            W_new, b_new = W - t * gW, b - t * gb
            new_loss, nW, nb = loss_and_grad(W_new, b_new, X, y, l2)
            if not np.isfinite(new_loss):
                if t < 1e-12:
                    raise DivergenceError("logistic loss became non-finite; try a smaller step or rescale features")
                t *= 0.5
                continue
            if new_loss <= loss - 0.5 * t * g2 or t < 1e-12:
                break
            t *= 0.5
        W, b, loss, gW, gb = W_new, b_new, new_loss, nW, nb
        step = min(t * 2.0, 1e6)
        gnorm = float(np.sqrt(np.sum(gW * gW) + np.sum(gb * gb)))
        it += 1
        if callback is not None:
            callback(it, loss)
    return LogisticModel(W, b, float(l2), it, gnorm)


def logreg_predict(model: LogisticModel, x) -> np.ndarray:
    return model.predict_proba(np.asarray(x, dtype=np.float64)[None])[0]
