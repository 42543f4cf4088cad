"""Bag-of-mouth: per-region whitening and codebooks over dense 8x8 patches,
triangle encoding, region pooling and a logistic-regression classifier."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..classifiers.logreg import LogisticModel, logreg_train
from ..container import load_container, save_container
from ..facetube import BoundingBox, bilinear_crop
from ..labels import ClassDistribution
from .encoding import pool_region, triangle_encode
from .kmeans import Codebook, kmeans_fit
from .patches import RegionGrid, extract_patches, normalize_patch
from .whitening import WhiteningTransform, whiten_apply, whiten_fit

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class MouthConfig:
    rows: tuple = (56, 96)          # half-open rectangle in the 96x96 face
    cols: tuple = (16, 80)
    grid: RegionGrid = field(default_factory=RegionGrid)
    K: int = 400
    variance: float = 0.9
    pool: str = "mean"
    max_iter: int = 300
    max_kmeans_points: int = 50000  # per region; a seeded subsample keeps fitting tractable
    l2: float = 1e-3
    crop: bool = True               # inputs are faces to crop (True) or mouth images (False)

    @property
    def descriptor_dim(self):
        return self.grid.n_regions * self.K


def mouth_crop(face, cfg: MouthConfig = MouthConfig()):
    """Resample the mouth rectangle of a face image to a square MouthImage."""
    face = np.asarray(face, dtype=np.float64)
    (r0, r1), (c0, c1) = cfg.rows, cfg.cols
    if r1 > face.shape[0] or c1 > face.shape[1]:
        raise ValueError(f"mouth rectangle exceeds the {face.shape} face image")
    n = cfg.grid.image_size
    return bilinear_crop(face, BoundingBox(c0, r0, c1, r1), n, n)


def _region_patches(img, cfg):
    return normalize_patch(extract_patches(img, cfg.grid))


@dataclass(frozen=True)
class BagOfMouthModel:
    config: MouthConfig
    whiteners: tuple
    codebooks: tuple
    desc_mean: np.ndarray
    desc_std: np.ndarray
    classifier: LogisticModel

    def descriptor(self, img):
        """6400-dimensional (16 regions x K) pooled triangle descriptor."""
        img = mouth_crop(img, self.config) if self.config.crop else img
        P = _region_patches(img, self.config)
        parts = [pool_region(triangle_encode(cb, whiten_apply(w, P[r])), self.config.pool)
                 for r, (w, cb) in enumerate(zip(self.whiteners, self.codebooks))]
        return np.concatenate(parts)

    def frame_proba(self, frames, threads=1):
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                D = np.stack(list(ex.map(self.descriptor, frames)))
        else:
            D = np.stack([self.descriptor(f) for f in frames])
        return self.classifier.predict_proba((D - self.desc_mean) / self.desc_std)

    def save(self, directory):
        cfg = asdict(self.config)
        arrays = {"desc_mean": self.desc_mean, "desc_std": self.desc_std,
                  "W": self.classifier.W, "b": self.classifier.b}
        for r, (w, cb) in enumerate(zip(self.whiteners, self.codebooks)):
            for name, a in w.to_arrays().items():
                arrays[f"r{r:02d}_{name}"] = a
            arrays[f"r{r:02d}_centroids"] = cb.centroids
        save_container(directory, {"model": "bag-of-mouth", "config": cfg,
                                   "l2": self.classifier.l2}, arrays)

    @classmethod
    def load(cls, directory):
        header, a = load_container(directory)
        c = dict(header["config"])
        c["grid"] = RegionGrid(**c["grid"])
        c["rows"], c["cols"] = tuple(c["rows"]), tuple(c["cols"])
        cfg = MouthConfig(**c)
        n = cfg.grid.n_regions
        whiteners = tuple(WhiteningTransform.from_arrays(
            {k: a[f"r{r:02d}_{k}"] for k in ("mean", "projection", "eigenvalues")}) for r in range(n))
        codebooks = tuple(Codebook(a[f"r{r:02d}_centroids"]) for r in range(n))
        clf = LogisticModel(a["W"], a["b"], header["l2"])
        return cls(cfg, whiteners, codebooks, a["desc_mean"], a["desc_std"], clf)


def bag_of_mouth_train(images, labels, cfg: MouthConfig = MouthConfig(), seed=0, threads=1):
    """Frame-level training. ``images`` are faces (or mouth images when
    ``cfg.crop`` is False) with one label per frame."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0 or len(images) != len(labels):
        raise ValueError("need one label per training image")
    mouths = [mouth_crop(f, cfg) if cfg.crop else np.asarray(f, dtype=np.float64) for f in images]
    P = np.stack([_region_patches(m, cfg) for m in mouths], axis=1)  # (regions, images, patches, 64)
    rng = np.random.default_rng(seed)
    region_seeds = rng.integers(0, 2**63 - 1, size=cfg.grid.n_regions)

    def fit_region(r):
        X = P[r].reshape(-1, cfg.grid.patch_dim)
        w = whiten_fit(X, "variance", cfg.variance)
        Z = whiten_apply(w, X)
        sub = np.random.default_rng(int(region_seeds[r]))
        if len(Z) > cfg.max_kmeans_points:
            Z = Z[np.sort(sub.choice(len(Z), cfg.max_kmeans_points, replace=False))]
        return w, kmeans_fit(Z, cfg.K, seed=int(sub.integers(2**63 - 1)), max_iter=cfg.max_iter)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            fitted = list(ex.map(fit_region, range(cfg.grid.n_regions)))
    else:
        fitted = [fit_region(r) for r in range(cfg.grid.n_regions)]
    whiteners = tuple(f[0] for f in fitted)
    codebooks = tuple(f[1] for f in fitted)
    partial = BagOfMouthModel(replace(cfg, crop=False), whiteners, codebooks, None, None, None)
    D = np.stack([partial.descriptor(m) for m in mouths])
    mu = D.mean(axis=0)
    sd = np.maximum(D.std(axis=0), STD_FLOOR)
    clf = logreg_train((D - mu) / sd, labels, l2=cfg.l2)
    return BagOfMouthModel(cfg, whiteners, codebooks, mu, sd, clf)


def bag_of_mouth_predict(model: BagOfMouthModel, frames, threads=1) -> ClassDistribution:
    """Video prediction: the mean of the frame distributions."""
    if len(frames) == 0:
        raise ValueError("video has no frames")
    p = model.frame_proba(frames, threads).mean(axis=0)
    return ClassDistribution(p / p.sum())
