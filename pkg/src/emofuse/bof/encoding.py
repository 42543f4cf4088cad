"""Triangle (soft-threshold) encoding and region pooling."""

import numpy as np


def centroid_distances(centroids, P):
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    C = np.asarray(centroids, dtype=np.float64)
    if P.shape[1] != C.shape[1]:
        raise ValueError(f"dimension mismatch: codebook has {C.shape[1]}, patches have {P.shape[1]}")
    d2 = np.sum(P * P, axis=1)[:, None] + np.sum(C * C, axis=1)[None, :] - 2.0 * (P @ C.T)
    return np.sqrt(np.maximum(d2, 0.0))


def triangle_from_distances(z):
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(0.0, z.mean(axis=-1, keepdims=True) - z)


def triangle_encode(codebook, P):
    """``max(0, mean_k z_k - z_k)`` for each row of ``P``."""
    C = getattr(codebook, "centroids", codebook)
    return triangle_from_distances(centroid_distances(C, P))


def pool_region(acts, mode="mean"):
    acts = np.asarray(acts, dtype=np.float64)
    if acts.ndim != 2 or acts.shape[0] == 0:
        raise ValueError("cannot pool an empty region")
    if mode == "mean":
        return acts.mean(axis=0)
    if mode == "std":
        return acts.std(axis=0)
    raise ValueError(f"unknown pooling mode {mode!r}")
