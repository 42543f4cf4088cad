"""Seeded synthetic datasets used by the tests, the benchmark and the
``make-synthetic`` command."""

import numpy as np

from .labels import N_CLASSES, PredictionSet, softmax


def two_cluster(n=400, dim=2, sep=2.0, spread=0.3, seed=0):
    """Centred points drawn around ``+sep`` and ``-sep`` on the diagonal."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.concatenate([rng.normal(sep, spread, (half, dim)),
                        rng.normal(-sep, spread, (n - half, dim))])
    return X - X.mean(axis=0)


def audio_sequences(n_clips=200, dim=16, min_steps=6, max_steps=24, salient=0.3,
                    noise=1.0, seed=0):
    """Variable-length clips where a random subset of timesteps carries a
    class prototype on top of Gaussian noise. Returns ``(ids, mats, labels)``."""
    rng = np.random.default_rng(seed)
    protos = rng.normal(0.0, 1.0, (N_CLASSES, dim)) * 2.0
    labels = np.arange(n_clips) % N_CLASSES
    rng.shuffle(labels)
    ids, mats = [], []
    for i, y in enumerate(labels):
        T = int(rng.integers(min_steps, max_steps + 1))
        A = rng.normal(0.0, noise, (T, dim))
        hot = rng.random(T) < salient
        hot[rng.integers(T)] = True
        A[hot] += protos[y]
        ids.append(f"a{i:04d}")
        mats.append(A)
    return ids, mats, labels.astype(np.int64)


def blobs(n_per_class=20, dim=2, n_classes=3, spread=0.2, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 3.0, (n_classes, dim))
    X = np.concatenate([rng.normal(c, spread, (n_per_class, dim)) for c in centers])
    y = np.repeat(np.arange(n_classes), n_per_class)
    return X, y


COMPLEMENTARY_SUBSETS = ((0, 1), (2, 3), (4, 5), (6,))
EXPERT_NAMES = ("expert_a", "expert_b", "expert_c", "expert_d")


def _expert_probs(rng, y, specialty, reliability, off_rate, overfit):
    """One expert's distribution for a clip of class ``y``."""
    K = N_CLASSES
    spec = list(specialty)
    others = [c for c in range(K) if c not in spec]
    if overfit:
        peak = y if rng.random() < 0.99 else int(rng.integers(K))
    elif y in spec:
        peak = y if rng.random() < reliability else int(rng.choice([c for c in range(K) if c != y]))
    else:
        peak = y if rng.random() < off_rate else int(rng.choice(others))
    z = rng.normal(0.0, 0.3, K)
    if not overfit and y not in spec:
        z[spec] -= 3.0
    z[peak] += 3.0 if overfit else 2.0
    return softmax(z)


def complementary_experts(n_clips=700, split_sizes=(300, 200, 200), seed=0,
                          reliability=(0.97, 0.97, 0.97), off_rate=0.35):
    """Four experts, each reliable on its own disjoint group of classes.

    Three training regimes are simulated: fit on train, fit on valid, and
    fit on train+valid. ``reliability`` gives each regime's accuracy on its
    own classes. Predictions on a regime's own training clips are
    overfit. Returns ``(labels, splits, regimes)`` where ``labels`` and
    ``splits`` map clip ids and ``regimes`` maps ``train``/``valid``/``full``
    to ``{expert: PredictionSet}`` over all clips.
    """
    if sum(split_sizes) != n_clips:
        raise ValueError("split sizes must add up to the clip count")
    rng = np.random.default_rng(seed)
    y = np.arange(n_clips) % N_CLASSES
    rng.shuffle(y)
    ids = tuple(f"c{i:04d}" for i in range(n_clips))
    tags = ("train",) * split_sizes[0] + ("valid",) * split_sizes[1] + ("test",) * split_sizes[2]
    fit_on = {"train": {"train"}, "valid": {"valid"}, "full": {"train", "valid"}}
    regimes = {}
    for r, (regime, seen) in enumerate(fit_on.items()):
        experts = {}
        for name, spec in zip(EXPERT_NAMES, COMPLEMENTARY_SUBSETS):
            P = np.stack([_expert_probs(rng, int(y[i]), spec, reliability[r], off_rate,
                                        tags[i] in seen) for i in range(n_clips)])
            experts[name] = PredictionSet(ids, P, y, tags)
        regimes[regime] = experts
    labels = dict(zip(ids, (int(v) for v in y)))
    return labels, dict(zip(ids, tags)), regimes


def mouth_faces(n_clips=28, frames_per_clip=2, size=96, noise=20.0, seed=0):
    """Faces whose mouth area carries a class-specific 8x8 texture.
    Returns ``(ids, videos, labels)`` with each video a list of frames."""
    rng = np.random.default_rng(seed)
    textures = np.random.default_rng(seed + 1).normal(0.0, 60.0, (N_CLASSES, 8, 8))
    labels = np.arange(n_clips) % N_CLASSES
    ids, videos = [], []
    for i, y in enumerate(labels):
        frames = []
        for _ in range(frames_per_clip):
            img = rng.normal(128.0, noise, (size, size))
            for r in range(60, 92, 8):
                for c in range(20, 76, 8):
                    img[r:r + 8, c:c + 8] += textures[y]
            frames.append(np.clip(img, 0, 255))
        ids.append(f"m{i:04d}")
        videos.append(frames)
    return ids, videos, labels.astype(np.int64)


def motion_videos(n_clips=14, shape=(35, 60, 60), seed=0):
    """Clips of a drifting sinusoidal grating whose direction depends on the
    class, plus noise. Returns ``(ids, videos, labels)``."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n_clips) % N_CLASSES
    T, H, W = shape
    t, yy, xx = np.meshgrid(np.arange(T), np.arange(H), np.arange(W), indexing="ij")
    ids, videos = [], []
    for i, y in enumerate(labels):
        ang = 2 * np.pi * y / N_CLASSES
        phase = rng.uniform(0, 2 * np.pi)
        v = np.sin(0.5 * (np.cos(ang) * xx + np.sin(ang) * yy) - 0.6 * t + phase)
        v = 128 + 80 * v + rng.normal(0.0, 10.0, shape)
        ids.append(f"v{i:04d}")
        videos.append(np.clip(v, 0, 255))
    return ids, videos, labels.astype(np.int64)


def frame_probabilities(n_clips=70, min_frames=1, max_frames=40, accuracy=0.6, seed=0):
    """Per-frame 7-way distributions that favour the clip's class. Returns
    ``(ids, sequences, labels)``."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n_clips) % N_CLASSES
    ids, seqs = [], []
    for i, y in enumerate(labels):
        T = int(rng.integers(min_frames, max_frames + 1))
        z = rng.normal(0.0, 1.0, (T, N_CLASSES))
        hit = rng.random(T) < accuracy
        z[hit, y] += 2.5
        ids.append(f"f{i:04d}")
        seqs.append(softmax(z, axis=1))
    return ids, seqs, labels.astype(np.int64)


def jittered_tube(n_frames=30, size=60.0, drift=0.0, jitter=2.0, seed=0):
    """Face boxes of side ``size + drift * t`` around a wobbling centre,
    as an ``(n, 4)`` x1,y1,x2,y2 array."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames)
    cx = 100 + 5 * np.sin(t / 5) + rng.normal(0, jitter, n_frames)
    cy = 90 + rng.normal(0, jitter, n_frames)
    side = size + drift * t
    w = side + rng.normal(0, jitter, n_frames)
    h = side * 1.2 + rng.normal(0, jitter, n_frames)
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)
