"""Two-hidden-layer MLP with top-N temporal pooling and its supervised
fine-tuning loop.

A clip is a ``(d_t, d_f)`` matrix. Each timestep passes through a ReLU layer
and a sigmoid layer; the sigmoid activations are pooled over time and the
pooled vector feeds a 7-way softmax.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..container import load_container, save_container
from ..labels import N_CLASSES, ClassDistribution, softmax
from .optim import OptimizerState, apply_update
from .pooling import PoolingConfig, topn_pool, topn_pool_backward
from .rbm import sigmoid

MAX_NORM = 1.2875
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
CONSTRAINED = ("W1", "W2")


@dataclass(frozen=True)
class FeatureSequence:
    clip_id: str
    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        if A.ndim != 2 or A.shape[0] < 1:
            raise ValueError(f"{self.clip_id}: need a (timesteps, features) matrix with at least one row")
        if not np.all(np.isfinite(A)):
            raise ValueError(f"{self.clip_id}: feature matrix has non-finite entries")
        object.__setattr__(self, "A", A)

    @property
    def n_steps(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class MLPWithPooling:
    params: dict
    pooling: PoolingConfig = PoolingConfig()
    offset: np.ndarray = None     # subtracted from every timestep before layer 1
    max_norm: float = MAX_NORM
    hidden_drop: float = 0.121
    feature_drop: float = 0.4

    def __post_init__(self):
        missing = [k for k in PARAM_NAMES if k not in self.params]
        if missing:
            raise ValueError(f"missing parameters: {missing}")
        for name in ("hidden_drop", "feature_drop"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.offset is None:
            object.__setattr__(self, "offset", np.zeros(self.dim))

    @property
    def dim(self):
        return self.params["W1"].shape[0]

    @property
    def sizes(self):
        p = self.params
        return p["W1"].shape[0], p["W1"].shape[1], p["W2"].shape[1], p["W3"].shape[1]

    @classmethod
    def init(cls, n_in, n_h1, n_h2, rng, n_classes=N_CLASSES, scale=0.01, **kw):
        params = {
            "W1": rng.standard_normal((n_in, n_h1)) * scale, "b1": np.zeros(n_h1),
            "W2": rng.standard_normal((n_h1, n_h2)) * scale, "b2": np.zeros(n_h2),
            "W3": rng.standard_normal((n_h2, n_classes)) * scale, "b3": np.zeros(n_classes),
        }
        return cls(params, **kw)

    @classmethod
    def from_dbn(cls, layers, rng, n_classes=N_CLASSES, scale=0.01, **kw):
        """Hidden layers copy the weights and hidden biases of the first two
        RBMs; the softmax layer starts small and random."""
        if len(layers) < 2:
            raise ValueError("need at least two pretrained layers")
        l1, l2 = layers[0], layers[1]
        if l2.n_visible != l1.n_hidden:
            raise ValueError("pretrained layer sizes do not chain")
        params = {
            "W1": l1.W.copy(), "b1": l1.hbias.copy(),
            "W2": l2.W.copy(), "b2": l2.hbias.copy(),
            "W3": rng.standard_normal((l2.n_hidden, n_classes)) * scale, "b3": np.zeros(n_classes),
        }
        model = cls(params, **kw)
        return replace(model, params=project_max_norm(params, model.max_norm))

    def _check(self, A):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if A.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model expects {self.dim} features, got {A.shape[1]}")
        return A

    def forward(self, A, mode="test"):
        """Deterministic class probabilities for one clip."""
        A = self._check(A) - self.offset
        p = self.params
        h1 = np.maximum(0.0, A @ p["W1"] + p["b1"])
        h2 = sigmoid(h1 @ p["W2"] + p["b2"])
        F = topn_pool(h2, self.pooling, mode)
        return softmax(F @ p["W3"] + p["b3"])

    def save(self, directory):
        header = {"model": "mlp-topn", "N": self.pooling.N,
                  "train_weights": list(self.pooling.train_weights),
                  "test_weights": list(self.pooling.test_weights),
                  "max_norm": self.max_norm, "hidden_drop": self.hidden_drop,
                  "feature_drop": self.feature_drop}
        save_container(directory, header, {**self.params, "offset": self.offset})

    @classmethod
    def load(cls, directory):
        header, arrays = load_container(directory)
        pooling = PoolingConfig(header["N"], tuple(header["train_weights"]), tuple(header["test_weights"]))
        params = {k: arrays[k] for k in PARAM_NAMES}
        return cls(params, pooling, arrays["offset"], header["max_norm"],
                   header["hidden_drop"], header["feature_drop"])


def project_max_norm(params, bound=MAX_NORM):
    """Rescale each hidden unit's incoming weight vector onto the L2 ball."""
    out = dict(params)
    for k in CONSTRAINED:
        W = params[k]
        norms = np.sqrt(np.sum(W * W, axis=0))
        scale = np.where(norms > bound, bound / np.maximum(norms, 1e-300), 1.0)
        out[k] = W * scale
    return out


def loss_and_grad(params, A, y, pooling=PoolingConfig(), mode="train", l2=0.0,
                  masks=None):
    """Cross-entropy of one clip plus ``l2/2`` times the squared weights.

    ``masks`` is an optional pair of inverted-dropout multipliers for the two
    hidden layers (shapes ``(d_t, h1)`` and ``(d_t, h2)``).
    """
    h1_pre = A @ params["W1"] + params["b1"]
    h1 = np.maximum(0.0, h1_pre)
    if masks is not None:
        h1 = h1 * masks[0]
    h2 = sigmoid(h1 @ params["W2"] + params["b2"])
    h2d = h2 * masks[1] if masks is not None else h2
    F = topn_pool(h2d, pooling, mode)
    probs = softmax(F @ params["W3"] + params["b3"])
    penalty = sum(float(np.sum(params[k] ** 2)) for k in ("W1", "W2", "W3"))
    loss = -float(np.log(max(probs[y], 1e-300))) + 0.5 * l2 * penalty

    dz3 = probs.copy()
    dz3[y] -= 1.0
    g = {"W3": np.outer(F, dz3) + l2 * params["W3"], "b3": dz3}
    dF = params["W3"] @ dz3
    dh2 = topn_pool_backward(h2d, dF, pooling, mode)
    if masks is not None:
        dh2 = dh2 * masks[1]
    dz2 = dh2 * h2 * (1.0 - h2)
    g["W2"] = h1.T @ dz2 + l2 * params["W2"]
    g["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params["W2"].T
    if masks is not None:
        dh1 = dh1 * masks[0]
    dz1 = dh1 * (h1_pre > 0)
    g["W1"] = A.T @ dz1 + l2 * params["W1"]
    g["b1"] = dz1.sum(axis=0)
    return loss, g


@dataclass(frozen=True)
class FinetuneConfig:
    iterations: int = 200
    clip_drop: float = 0.12
    l2: float = 1e-5
    eps0: float = 0.0005
    mu: float = 0.46
    rho: float = 0.92
    decay_after: int = 50
    lr_decay: float = 0.99
    patience: int = None
    center_tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.clip_drop < 1.0:
            raise ValueError("clip_drop must lie in [0, 1)")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class FinetuneLog:
    valid_accuracy: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    learning_rate: list = field(default_factory=list)
    max_norm_seen: float = 0.0
    best_iteration: int = 0


def _check_centered(seqs, offset, tol):
    rows = np.concatenate([s.A for s in seqs]) - offset
    scale = max(1.0, float(np.abs(rows).max()))
    drift = float(np.abs(rows.mean(axis=0)).max())
    if drift > tol * scale:
        raise ValueError(f"training features are not centred (max column mean {drift:.3g}); "
                         "subtract the training mean first")


def center_sequences(train, *others):
    """Subtract the mean training timestep from every sequence."""
    mean = np.concatenate([s.A for s in train]).mean(axis=0)
    shift = lambda seqs: [FeatureSequence(s.clip_id, s.A - mean) for s in seqs]
    return (mean, shift(train), *[shift(o) for o in others])


def _dropout_masks(rng, n, sizes, rate):
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return tuple((rng.random((n, h)) < keep) / keep for h in sizes)


def validation_accuracy(mlp, seqs, labels):
    if not len(seqs):
        return float("nan")
    hits = sum(int(np.argmax(mlp.forward(s.A)) == y) for s, y in zip(seqs, labels))
    return hits / len(seqs)


def finetune(mlp: MLPWithPooling, train, train_labels, valid, valid_labels, rng,
             config: FinetuneConfig = FinetuneConfig(), log: FinetuneLog = None,
             on_update=None):
    """Per-clip stochastic training with the RMSProp/Nesterov update.

    Returns the parameters with the best validation accuracy seen (ties keep
    the earlier iteration). ``on_update(params)`` is called after every
    parameter update, after the max-norm projection.
    """
    if not len(train) or not len(valid):
        raise ValueError("fine-tuning needs non-empty training and validation sets")
    train_labels = np.asarray(train_labels, dtype=np.int64)
    valid_labels = np.asarray(valid_labels, dtype=np.int64)
    _check_centered(train, mlp.offset, config.center_tol)
    log = log if log is not None else FinetuneLog()
    _, h1, h2, _ = mlp.sizes

    state = OptimizerState.init(mlp.params, mu=config.mu, eps0=config.eps0, rho=config.rho)
    best = mlp
    best_acc = validation_accuracy(mlp, valid, valid_labels)
    prev_err = 1.0 - best_acc
    stale = 0
    order = rng.permutation(len(train))
    n_skip = int(round(config.clip_drop * len(train)))
    for it in range(1, config.iterations + 1):
        order = rng.permutation(order)
        used = order[n_skip:]
        total = 0.0
        for i in used:
            A = train[i].A - mlp.offset
            perm = rng.permutation(A.shape[0])
            n_keep = max(1, int(round((1.0 - mlp.feature_drop) * A.shape[0])))
            A = A[perm[:n_keep]]
            masks = _dropout_masks(rng, n_keep, (h1, h2), mlp.hidden_drop)
            loss, g = loss_and_grad(state.theta, A, train_labels[i], mlp.pooling, "train",
                                    config.l2, masks)
            total += loss
            state = apply_update(state, g)
            state = replace(state, theta=project_max_norm(state.theta, mlp.max_norm))
            norms = max(float(np.sqrt(np.sum(state.theta[k] ** 2, axis=0)).max()) for k in CONSTRAINED)
            log.max_norm_seen = max(log.max_norm_seen, norms)
            if on_update is not None:
                on_update(state.theta)
        current = replace(mlp, params=dict(state.theta))
        acc = validation_accuracy(current, valid, valid_labels)
        log.valid_accuracy.append(acc)
        log.train_loss.append(total / max(1, len(used)))
        log.learning_rate.append(state.eps0)
        if acc > best_acc:
            best, best_acc, stale = current, acc, 0
            log.best_iteration = it
        else:
            stale += 1
        err = 1.0 - acc
        if it > config.decay_after and err > prev_err:
            state = replace(state, eps0=state.eps0 * config.lr_decay)
        prev_err = err
        if config.patience is not None and stale >= config.patience:
            break
    return best


def predict_clip(mlp: MLPWithPooling, seq) -> ClassDistribution:
    A = seq.A if isinstance(seq, FeatureSequence) else seq
    return ClassDistribution(mlp.forward(A, "test"))
