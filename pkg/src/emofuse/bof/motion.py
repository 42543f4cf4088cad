"""Motion bag-of-words: PCA-whitened spatio-temporal blocks, a linear
autoencoder feature extractor, super-block descriptors from the eight corner
sub-blocks, a word codebook and chi-square SVM classification."""

import itertools
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..classifiers.logreg import DivergenceError
from ..container import load_container, save_container
from .kmeans import Codebook, assign, kmeans_fit
from .whitening import WhiteningTransform, whiten_apply, whiten_fit

BLOCK = (10, 16, 16)
SUPER = (14, 20, 20)
STRIDES = (7, 10, 10)


def _check_video(v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 3:
        raise ValueError(f"video must be (frames, rows, cols), got shape {v.shape}")
    return v


def sample_video_blocks(videos, count, seed=0, shape=BLOCK):
    """``count`` blocks at uniformly random positions; the video is chosen
    uniformly among those large enough. Returns ``(count, t, h, w)``."""
    videos = [_check_video(v) for v in videos]
    ok = []
    for i, v in enumerate(videos):
        if all(s >= b for s, b in zip(v.shape, shape)):
            ok.append(i)
        else:
            warnings.warn(f"video {i} with shape {v.shape} is smaller than a {shape} block; skipped")
    if not ok:
        raise ValueError("no video is large enough for a block")
    rng = np.random.default_rng(seed)
    out = np.empty((count, *shape))
    src = rng.integers(len(ok), size=count)
    for n in range(count):
        v = videos[ok[src[n]]]
        t, y, x = (int(rng.integers(s - b + 1)) for s, b in zip(v.shape, shape))
        out[n] = v[t:t + shape[0], y:y + shape[1], x:x + shape[2]]
    return out


@dataclass(frozen=True)
class LinearEncoder:
    """Tied-weight linear autoencoder; the code is ``x @ W + b``."""

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    trained: bool = False

    @property
    def hidden(self):
        return self.W.shape[1]

    @classmethod
    def init(cls, dim, hidden, rng, scale=None):
        scale = 1.0 / np.sqrt(dim) if scale is None else scale
        return cls(rng.standard_normal((dim, hidden)) * scale, np.zeros(hidden), np.zeros(dim))

    def encode(self, X):
        if not self.trained:
            raise ValueError("encoder has not been trained")
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def reconstruct(self, X):
        return (X @ self.W + self.b) @ self.W.T + self.c


def autoencoder_loss(enc: LinearEncoder, X):
    R = enc.reconstruct(X) - X
    return float(0.5 * np.mean(np.sum(R * R, axis=1)))


def _ae_grads(W, b, c, X):
    H = X @ W + b
    R = H @ W.T + c - X
    n = len(X)
    dH = R @ W
    gW = (X.T @ dH + R.T @ H) / n
    return gW, dH.sum(axis=0) / n, R.sum(axis=0) / n


def default_encoder_train(X, hidden=300, lr=1e-4, momentum=0.9, epochs=1000, batch_size=100,
                          seed=0, log=None) -> LinearEncoder:
    """Minibatch SGD with classical momentum. ``log`` receives the mean
    reconstruction loss before training and after every epoch."""
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    enc = LinearEncoder.init(X.shape[1], hidden, rng)
    W, b, c = enc.W.copy(), enc.b.copy(), enc.c.copy()
    vW, vb, vc = np.zeros_like(W), np.zeros_like(b), np.zeros_like(c)
    if log is not None:
        log.append(autoencoder_loss(enc, X))
    for _ in range(epochs):
        order = rng.permutation(len(X))
        for s in range(0, len(X), batch_size):
            gW, gb, gc = _ae_grads(W, b, c, X[order[s:s + batch_size]])
            vW = momentum * vW - lr * gW
            vb = momentum * vb - lr * gb
            vc = momentum * vc - lr * gc
            W, b, c = W + vW, b + vb, c + vc
        loss = autoencoder_loss(LinearEncoder(W, b, c), X)
        if not np.isfinite(loss):
            raise DivergenceError("autoencoder training diverged; lower the learning rate")
        if log is not None:
            log.append(loss)
    return LinearEncoder(W, b, c, trained=True)


def corner_offsets(block=BLOCK, sb=SUPER):
    return list(itertools.product(*[(0, s - b) for s, b in zip(sb, block)]))


def superblock_codes(encoder: LinearEncoder, block_pca: WhiteningTransform, sb):
    """Concatenated codes of the eight corner sub-blocks (pre-projection)."""
    if encoder is None or not encoder.trained:
        raise ValueError("super-block descriptors need a trained encoder")
    sb = np.asarray(sb, dtype=np.float64)
    lead = sb.shape[:-3]
    if sb.shape[-3:] != SUPER:
        raise ValueError(f"super block must be {SUPER}, got {sb.shape[-3:]}")
    parts = []
    for t, y, x in corner_offsets():
        sub = sb[..., t:t + BLOCK[0], y:y + BLOCK[1], x:x + BLOCK[2]].reshape(*lead, -1)
        parts.append(encoder.encode(whiten_apply(block_pca, sub)))
    return np.concatenate(parts, axis=-1)


def superblock_descriptor(encoder, block_pca, sb, sb_pca: WhiteningTransform = None):
    codes = superblock_codes(encoder, block_pca, sb)
    return codes if sb_pca is None else whiten_apply(sb_pca, codes)


def superblock_positions(shape, size=SUPER, strides=STRIDES):
    counts = [(L - S) // st + 1 if L >= S else 0 for L, S, st in zip(shape, size, strides)]
    if min(counts) < 1:
        raise ValueError(f"video of shape {tuple(shape)} is smaller than one {size} super block")
    return list(itertools.product(*[range(0, n * st, st) for n, st in zip(counts, strides)]))


def dense_superblocks(video):
    """All super blocks on the stride grid, ``(n, 14, 20, 20)``."""
    v = _check_video(video)
    pos = superblock_positions(v.shape)
    return np.stack([v[t:t + SUPER[0], y:y + SUPER[1], x:x + SUPER[2]] for t, y, x in pos])


def assign_words(codebook: Codebook, descriptors):
    """Hard-assignment histogram normalised by the descriptor count."""
    D = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if len(D) == 0:
        raise ValueError("no descriptors to assign")
    labels, _ = assign(D, codebook.centroids)
    return np.bincount(labels, minlength=codebook.K) / len(D)


@dataclass(frozen=True)
class MotionConfig:
    n_blocks: int = 20000
    block_components: int = 300
    hidden: int = 300
    lr: float = 1e-4
    momentum: float = 0.9
    epochs: int = 1000
    sb_components: int = 100
    K: int = 300
    max_iter: int = 300


@dataclass(frozen=True)
class MotionFeatures:
    config: MotionConfig
    block_pca: WhiteningTransform
    encoder: LinearEncoder
    sb_pca: WhiteningTransform
    codebook: Codebook

    def video_descriptors(self, video):
        return superblock_descriptor(self.encoder, self.block_pca, dense_superblocks(video), self.sb_pca)

    def histogram(self, video):
        return assign_words(self.codebook, self.video_descriptors(video))

    def save(self, directory):
        arrays = {f"block_{k}": a for k, a in self.block_pca.to_arrays().items()}
        arrays.update({f"sb_{k}": a for k, a in self.sb_pca.to_arrays().items()})
        arrays.update({"enc_W": self.encoder.W, "enc_b": self.encoder.b, "enc_c": self.encoder.c,
                       "centroids": self.codebook.centroids})
        save_container(directory, {"model": "motion-words", "config": asdict(self.config)}, arrays)

    @classmethod
    def load(cls, directory):
        header, a = load_container(directory)
        keys = ("mean", "projection", "eigenvalues")
        return cls(MotionConfig(**header["config"]),
                   WhiteningTransform.from_arrays({k: a[f"block_{k}"] for k in keys}, "fixed"),
                   LinearEncoder(a["enc_W"], a["enc_b"], a["enc_c"], trained=True),
                   WhiteningTransform.from_arrays({k: a[f"sb_{k}"] for k in keys}, "fixed"),
                   Codebook(a["centroids"]))


def motion_features_train(videos, cfg: MotionConfig = MotionConfig(), seed=0, threads=1):
    """Fit block PCA, encoder, super-block PCA and word codebook on
    training videos."""
    seeds = np.random.SeedSequence(seed).spawn(4)
    blocks = sample_video_blocks(videos, cfg.n_blocks, seeds[0]).reshape(cfg.n_blocks, -1)
    block_pca = whiten_fit(blocks, "fixed", k=min(cfg.block_components, blocks.shape[1]))
    Z = whiten_apply(block_pca, blocks)
    enc = default_encoder_train(Z, cfg.hidden, cfg.lr, cfg.momentum, cfg.epochs, seed=seeds[1])
    sbs = np.concatenate([dense_superblocks(v) for v in videos
                          if all(s >= b for s, b in zip(np.shape(v), SUPER))])
    codes = superblock_codes(enc, block_pca, sbs)
    sb_pca = whiten_fit(codes, "fixed", k=min(cfg.sb_components, codes.shape[1]))
    D = whiten_apply(sb_pca, codes)
    codebook = kmeans_fit(D, cfg.K, seed=int(seeds[2].generate_state(1)[0]),
                          max_iter=cfg.max_iter, threads=threads)
    return MotionFeatures(cfg, block_pca, enc, sb_pca, codebook)
