"""Gaussian-visible RBMs trained with one-step contrastive divergence and
greedy layer-wise DBN pretraining.

Visible units are Gaussian with unit variance, so inputs must be centred.
Hidden units are either bounded noisy rectifiers or Bernoulli.
"""

from dataclasses import dataclass, replace

import numpy as np

NOISY_RELU = "gaussian-noisyrelu"
BERNOULLI = "gaussian-bernoulli"


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def noisy_relu_bounded(x, stochastic=False, rng=None, alpha=6.0):
    """``min(alpha, max(0, x + psi))`` with ``psi ~ N(0, sigmoid(x))`` when
    stochastic, ``psi = 0`` otherwise."""
    x = np.asarray(x, dtype=np.float64)
    if stochastic:
        if rng is None:
            raise ValueError("stochastic activation needs an rng")
        x = x + rng.standard_normal(x.shape) * sigmoid(x)
    return np.minimum(alpha, np.maximum(0.0, x))


@dataclass(frozen=True)
class RBMLayer:
    W: np.ndarray            # (visible, hidden)
    vbias: np.ndarray
    hbias: np.ndarray
    kind: str = NOISY_RELU
    alpha: float = 6.0
    lr: float = 1e-3
    l2: float = 0.0

    def __post_init__(self):
        if self.kind not in (NOISY_RELU, BERNOULLI):
            raise ValueError(f"unknown hidden unit kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        for a in (self.W, self.vbias, self.hbias):
            if not np.all(np.isfinite(a)):
                raise ValueError("RBM parameters must be finite")

    @classmethod
    def init(cls, n_visible, n_hidden, rng, kind=NOISY_RELU, scale=0.01, **kw):
        return cls(rng.standard_normal((n_visible, n_hidden)) * scale,
                   np.zeros(n_visible), np.zeros(n_hidden), kind, **kw)

    @property
    def n_visible(self):
        return self.W.shape[0]

    @property
    def n_hidden(self):
        return self.W.shape[1]

    def hidden_mean(self, v):
        """Deterministic hidden activation used for statistics and stacking."""
        x = v @ self.W + self.hbias
        if self.kind == NOISY_RELU:
            return noisy_relu_bounded(x, alpha=self.alpha)
        return sigmoid(x)

    def hidden_sample(self, v, rng):
        x = v @ self.W + self.hbias
        if self.kind == NOISY_RELU:
            return noisy_relu_bounded(x, True, rng, self.alpha)
        p = sigmoid(x)
        return (rng.random(p.shape) < p).astype(np.float64)

    def visible_mean(self, h):
        return h @ self.W.T + self.vbias

    def reconstruct(self, v):
        return self.visible_mean(self.hidden_mean(v))


def reconstruction_error(layer: RBMLayer, data) -> float:
    """Mean squared distance between inputs and their deterministic
    reconstructions."""
    v = np.asarray(data, dtype=np.float64)
    r = layer.reconstruct(v)
    return float(np.mean(np.sum((v - r) ** 2, axis=1)))


def cd1_update(layer: RBMLayer, batch, rng, sample_weight=None) -> RBMLayer:
    """One CD-1 step: sampled hidden state, mean-field Gaussian reconstruction,
    deterministic hidden response, then a gradient step with L2 decay.

    ``sample_weight`` scales each row's contribution to the gradient; all
    zeros leaves only the weight decay.
    """
    v0 = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if v0.shape[1] != layer.n_visible:
        raise ValueError(f"batch has {v0.shape[1]} columns, layer expects {layer.n_visible}")
    n = v0.shape[0]
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    h0_mean = layer.hidden_mean(v0)
    h0 = layer.hidden_sample(v0, rng)
    v1 = layer.visible_mean(h0)
    h1_mean = layer.hidden_mean(v1)
    wv0, wv1 = v0 * w[:, None], v1 * w[:, None]
    dW = (wv0.T @ h0_mean - wv1.T @ h1_mean) / n - layer.l2 * layer.W
    dvb = (wv0 - wv1).sum(axis=0) / n
    dhb = ((h0_mean - h1_mean) * w[:, None]).sum(axis=0) / n
    return replace(layer, W=layer.W + layer.lr * dW, vbias=layer.vbias + layer.lr * dvb,
                   hbias=layer.hbias + layer.lr * dhb)


def train_rbm(layer: RBMLayer, data, epochs, rng, batch_size=32, log=None) -> RBMLayer:
    """Minibatch CD-1 over shuffled data. ``log`` (a list) receives the
    reconstruction error before training and after every epoch."""
    data = np.asarray(data, dtype=np.float64)
    if log is not None:
        log.append(reconstruction_error(layer, data))
    for _ in range(epochs):
        order = rng.permutation(len(data))
        for s in range(0, len(data), batch_size):
            layer = cd1_update(layer, data[order[s:s + batch_size]], rng)
        if log is not None:
            log.append(reconstruction_error(layer, data))
    return layer


@dataclass(frozen=True)
class DBNConfig:
    hidden_sizes: tuple = (350, 350, 350)
    learning_rates: tuple = (0.0006, 0.0005, 0.001)
    l2: tuple = (2e-3, 2e-4, 2e-4)
    epochs: int = 15
    batch_size: int = 32
    alpha: float = 6.0

    def __post_init__(self):
        n = len(self.hidden_sizes)
        if n < 1 or len(self.learning_rates) != n or len(self.l2) != n:
            raise ValueError("hidden_sizes, learning_rates and l2 need one entry per layer")


def pretrain_dbn(config: DBNConfig, data, rng, logs=None):
    """Greedy layer-wise pretraining. The first layer has bounded noisy-ReLU
    hiddens, the rest Bernoulli; each layer sees the deterministic
    activations of the layers below."""
    x = np.asarray(data, dtype=np.float64)
    layers = []
    n_in = x.shape[1]
    for k, n_hidden in enumerate(config.hidden_sizes):
        kind = NOISY_RELU if k == 0 else BERNOULLI
        layer = RBMLayer.init(n_in, n_hidden, rng, kind, alpha=config.alpha,
                              lr=config.learning_rates[k], l2=config.l2[k])
        log = [] if logs is not None else None
        layer = train_rbm(layer, x, config.epochs, rng, config.batch_size, log)
        if logs is not None:
            logs.append(log)
        layers.append(layer)
        x = layer.hidden_mean(x)
        n_in = n_hidden
    return layers
