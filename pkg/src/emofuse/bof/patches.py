"""Dense patch extraction over a fixed region grid and per-patch
standardisation."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NORM_EPS = 1e-8


@dataclass(frozen=True)
class RegionGrid:
    image_size: int = 96
    regions_per_side: int = 4
    patch: int = 8
    stride: int = 1

    def __post_init__(self):
        if self.image_size % self.regions_per_side:
            raise ValueError("regions must tile the image exactly")
        if self.patch > self.region_size:
            raise ValueError("patch is larger than a region")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def region_size(self):
        return self.image_size // self.regions_per_side

    @property
    def n_regions(self):
        return self.regions_per_side ** 2

    @property
    def patches_per_region(self):
        return ((self.region_size - self.patch) // self.stride + 1) ** 2

    @property
    def patch_dim(self):
        return self.patch * self.patch

    def region_slices(self):
        r = self.region_size
        return [(slice(i * r, (i + 1) * r), slice(j * r, (j + 1) * r))
                for i in range(self.regions_per_side) for j in range(self.regions_per_side)]


def extract_patches(img, grid: RegionGrid = RegionGrid()):
    """``(n_regions, patches_per_region, patch*patch)`` array, regions in
    row-major order and patches row-major within a region."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != (grid.image_size, grid.image_size):
        raise ValueError(f"expected a {grid.image_size}x{grid.image_size} image, got {img.shape}")
    out = []
    for rs, cs in grid.region_slices():
        win = sliding_window_view(img[rs, cs], (grid.patch, grid.patch))[::grid.stride, ::grid.stride]
        out.append(win.reshape(-1, grid.patch_dim))
    return np.stack(out)


def normalize_patch(p, eps=NORM_EPS):
    """Zero mean and unit variance along the last axis; near-constant
    patches become all zeros."""
    p = np.asarray(p, dtype=np.float64)
    centred = p - p.mean(axis=-1, keepdims=True)
    var = np.mean(centred * centred, axis=-1, keepdims=True)
    ok = var > eps
    return np.where(ok, centred / np.sqrt(np.where(ok, var, 1.0)), 0.0)
