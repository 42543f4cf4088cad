"""Multiclass C-SVM: one-vs-one SMO, Platt scaling and pairwise coupling."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .. import _kernels
from ..labels import N_CLASSES
from ..container import load_container, save_container
from .kernels import KernelConfig, gram

SMO_TOLERANCE = 1e-3
MIN_PROB = 1e-7


class SVMError(ValueError):
    pass


@dataclass(frozen=True)
class BinarySVM:
    pos: int
    neg: int
    sv: np.ndarray          # indices into the stored training vectors
    coef: np.ndarray        # alpha_i * y_i for each support vector
    alpha: np.ndarray       # alpha_i for each support vector
    rho: float
    prob_a: float
    prob_b: float
    kkt_gap: float
    n_iter: int


@dataclass(frozen=True)
class TrainedSVM:
    config: KernelConfig
    classes: tuple          # present label indices, ascending
    X: np.ndarray           # training vectors in canonical order
    y: np.ndarray           # their labels
    machines: tuple = field(repr=False)

    @property
    def dim(self):
        return self.X.shape[1]

    def decision_values(self, X):
        X = _check_features(X, self.dim)
        K = gram(self.config, X, self.X)
        return np.stack([K[:, m.sv] @ m.coef - m.rho for m in self.machines], axis=1)

    def predict_proba(self, X):
        """(n, 7) calibrated probabilities; absent classes get 0."""
        X = _check_features(X, self.dim)
        dec = self.decision_values(X)
        k = len(self.classes)
        out = np.zeros((X.shape[0], N_CLASSES))
        pos = {c: i for i, c in enumerate(self.classes)}
        R = np.zeros((X.shape[0], k, k))
        for col, m in enumerate(self.machines):
            r = sigmoid_predict(dec[:, col], m.prob_a, m.prob_b)
            r = np.clip(r, MIN_PROB, 1 - MIN_PROB)
            i, j = pos[m.pos], pos[m.neg]
            R[:, i, j] = r
            R[:, j, i] = 1 - r
        if k == 2:
            p = np.stack([R[:, 0, 1], R[:, 1, 0]], axis=1)
        else:
            p = pairwise_coupling(R)
        out[:, list(self.classes)] = p
        return out / out.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, directory):
        header = {
            "model": "svm",
            "kind": self.config.kind,
            "gamma": self.config.gamma,
            "C": self.config.C,
            "classes": list(self.classes),
            "machines": [
                {"pos": m.pos, "neg": m.neg, "rho": m.rho, "prob_a": m.prob_a,
                 "prob_b": m.prob_b, "kkt_gap": m.kkt_gap, "n_iter": m.n_iter,
                 "sv": m.sv.tolist()}
                for m in self.machines
            ],
        }
        alphas = np.zeros((len(self.machines), self.X.shape[0]))
        for r, m in enumerate(self.machines):
            alphas[r, m.sv] = m.alpha
        save_container(directory, header,
                       {"vectors": self.X, "labels": self.y.astype(np.float64), "alpha": alphas})

    @classmethod
    def load(cls, directory):
        header, arrays = load_container(directory)
        if header.get("model") != "svm":
            raise SVMError(f"{directory} does not hold an SVM")
        cfg = KernelConfig(header["kind"], header["gamma"], header["C"])
        labels = arrays["labels"].ravel().astype(np.int64)
        machines = []
        for r, m in enumerate(header["machines"]):
            sv = np.array(m["sv"], dtype=np.int64)
            alpha = arrays["alpha"][r, sv]
            sign = np.where(labels[sv] == m["pos"], 1.0, -1.0)
            machines.append(BinarySVM(m["pos"], m["neg"], sv, alpha * sign, alpha, m["rho"],
                                      m["prob_a"], m["prob_b"], m["kkt_gap"], m["n_iter"]))
        return cls(cfg, tuple(header["classes"]), arrays["vectors"], labels, tuple(machines))


def _check_features(X, dim=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(X)):
        raise SVMError("features contain non-finite values")
    if dim is not None and X.shape[1] != dim:
        raise SVMError(f"dimension mismatch: model has {dim} features, input has {X.shape[1]}")
    return X


def canonical_order(X, y):
    """Permutation sorting samples by label then feature values, so training
    does not depend on the order samples arrive in."""
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    return np.lexsort(keys)


def train_binary(K, y, C, eps=SMO_TOLERANCE, max_iter=None, backend=None):
    """Solve one binary C-SVM given its kernel block. ``y`` is +/-1."""
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    if max_iter is None:
        max_iter = max(10_000_000, 100 * n)
    return _kernels.smo_solve(Q, y, C, eps, max_iter, backend=backend)


def svm_train(X, y, cfg: KernelConfig, eps=SMO_TOLERANCE, backend=None) -> TrainedSVM:
    """One-vs-one C-SVMs over the classes present in ``y`` (label indices)."""
    X = _check_features(X)
    y = np.asarray(y, dtype=np.int64).ravel()
    if X.shape[0] != y.shape[0]:
        raise SVMError("one label per training vector required")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise SVMError(f"need at least two classes to train, got {list(classes)}")
    order = canonical_order(X, y)
    X, y = X[order], y[order]
    K = gram(cfg, X)
    machines = []
    for a, b in combinations(classes, 2):
        idx = np.flatnonzero((y == a) | (y == b))
        yy = np.where(y[idx] == a, 1.0, -1.0)
        Kab = K[np.ix_(idx, idx)]
        alpha, rho, n_iter, gap = train_binary(Kab, yy, cfg.C, eps, backend=backend)
        dec = Kab @ (alpha * yy) - rho
        A, B = sigmoid_train(dec, yy)
        nz = alpha > 0
        machines.append(BinarySVM(a, b, idx[nz], (alpha * yy)[nz], alpha[nz], float(rho),
                                  A, B, float(gap), int(n_iter)))
    X.setflags(write=False)
    y.setflags(write=False)
    return TrainedSVM(cfg, classes, X, y, tuple(machines))


def svm_predict_proba(model: TrainedSVM, x) -> np.ndarray:
    """Calibrated 7-way distribution for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SVMError("svm_predict_proba takes one feature vector; use model.predict_proba")
    return model.predict_proba(x[None])[0]


def sigmoid_predict(dec, A, B):
    f = dec * A + B
    out = np.empty_like(f)
    pos = f >= 0
    e = np.exp(-f[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(f[~pos]))
    return out


def sigmoid_train(dec, y, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Platt scaling fitted by Newton's method with backtracking (Lin, Lin &
    Weng's variant). Returns ``(A, B)`` with ``P(+1 | f) = 1 / (1 + exp(A f + B))``."""
    dec = np.asarray(dec, dtype=np.float64)
    prior1 = float(np.sum(y > 0))
    prior0 = float(len(y) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y > 0, hi, lo)
    A, B = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))

    def objective(A, B):
        f = dec * A + B
        return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-np.abs(f))),
                                     (t - 1) * f + np.log1p(np.exp(-np.abs(f))))))

    fval = objective(A, B)
    for _ in range(max_iter):
        p = sigmoid_predict(dec, A, B)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(dec * dec * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(dec * d2)
        d1 = t - p
        g1 = np.sum(dec * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        if step < min_step:
            break
    return float(A), float(B)


def pairwise_coupling(R, max_iter=None):
    """Wu, Lin & Weng's second coupling method, vectorised over samples.

    ``R[s, i, j]`` estimates ``P(i | i or j)`` for sample ``s``.
    """
    n, k, _ = R.shape
    Q = np.zeros((n, k, k))
    for t in range(k):
        others = [j for j in range(k) if j != t]
        Q[:, t, t] = np.sum(R[:, others, t] ** 2, axis=1)
        for j in others:
            Q[:, t, j] = -R[:, j, t] * R[:, t, j]
    p = np.full((n, k), 1.0 / k)
    eps = 0.005 / k
    max_iter = max(100, k) if max_iter is None else max_iter
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        Qp = np.einsum("sij,sj->si", Q, p)
        pQp = np.einsum("si,si->s", p, Qp)
        err = np.max(np.abs(Qp - pQp[:, None]), axis=1)
        active &= err >= eps
        if not active.any():
            break
        for t in range(k):
            diff = np.where(active, (-Qp[:, t] + pQp) / Q[:, t, t], 0.0)
            p[:, t] += diff
            pQp = (pQp + diff * (diff * Q[:, t, t] + 2 * Qp[:, t])) / (1 + diff) ** 2
            Qp = (Qp + diff[:, None] * Q[:, t, :]) / (1 + diff)[:, None]
            p = p / (1 + diff)[:, None]
    return p
