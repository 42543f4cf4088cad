"""Facetube smoothing, squaring, side-length stabilisation and cropping.

Box coordinates are in pixel-edge units: pixel ``k`` spans ``[k, k + 1)``,
so a box ``(0, 0, W, H)`` covers a whole ``W x H`` frame.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .container import atomic_write_bytes, atomic_write_text
from .labels import format_float


class FacetubeError(ValueError):
    pass


@dataclass(frozen=True)
class BoundingBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(np.isfinite(vals)):
            raise FacetubeError(f"non-finite box {vals}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise FacetubeError(f"degenerate box {vals}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def center(self):
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @property
    def area(self):
        return self.width * self.height

    def as_array(self):
        return np.array([self.x1, self.y1, self.x2, self.y2])

    def contains(self, other: "BoundingBox", tol=1e-9) -> bool:
        return (other.x1 >= self.x1 - tol and other.y1 >= self.y1 - tol
                and other.x2 <= self.x2 + tol and other.y2 <= self.y2 + tol)


@dataclass(frozen=True)
class FaceTube:
    frames: tuple  # ((frame_index, BoundingBox), ...)

    def __post_init__(self):
        frames = tuple((int(i), b) for i, b in self.frames)
        idx = [i for i, _ in frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise FacetubeError("frame indices must be strictly increasing")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    @property
    def indices(self):
        return np.array([i for i, _ in self.frames], dtype=np.int64)

    def coords(self) -> np.ndarray:
        """(n, 4) array of x1, y1, x2, y2."""
        if not self.frames:
            return np.zeros((0, 4))
        return np.array([b.as_array() for _, b in self.frames])

    @classmethod
    def from_coords(cls, indices, coords):
        return cls(tuple((int(i), BoundingBox(*map(float, c))) for i, c in zip(indices, coords)))

    def mean_area(self):
        return float(np.mean([b.area for _, b in self.frames])) if self.frames else 0.0


@dataclass(frozen=True)
class SmoothingConfig:
    window: int = 11
    slope_threshold: float = 1.5
    output_size: int = 48

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise FacetubeError(f"window must be odd and >= 1, got {self.window}")
        if not self.slope_threshold > 0:
            raise FacetubeError("slope threshold must be positive")
        if self.output_size < 1:
            raise FacetubeError("output size must be positive")


def moving_average(x, window):
    """Centred moving average. Near the ends the window shrinks symmetrically
    so it stays centred on the frame."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    half = window // 2
    out = np.empty_like(x)
    for i in range(n):
        h = min(half, i, n - 1 - i)
        out[i] = x[i - h:i + h + 1].mean(axis=0)
    return out


def smooth_corners_and_centers(tube: FaceTube, cfg: SmoothingConfig = SmoothingConfig()) -> FaceTube:
    """Moving-average both corners and the centre; rebuild each box from the
    smoothed centre and the extents of the smoothed corners."""
    if len(tube) == 0:
        raise FacetubeError("cannot smooth an empty facetube")
    if cfg.window == 1:
        return tube
    c = tube.coords()
    corners = moving_average(c, cfg.window)
    centers = moving_average((c[:, :2] + c[:, 2:]) / 2.0, cfg.window)
    half_ext = (corners[:, 2:] - corners[:, :2]) / 2.0
    out = np.hstack([centers - half_ext, centers + half_ext])
    # a constant coordinate must come back bit-identical
    same = np.all(c == c[0], axis=0)
    out[:, same] = c[0, same]
    return FaceTube.from_coords(tube.indices, out)


def largest_centered_square(box: BoundingBox) -> BoundingBox:
    side = min(box.width, box.height)
    if box.width == box.height:
        return box
    cx, cy = box.center
    h = side / 2.0
    x1, y1, x2, y2 = cx - h, cy - h, cx + h, cy + h
    # keep inside the source box despite rounding of the centre
    x1, y1 = max(x1, box.x1), max(y1, box.y1)
    x2, y2 = min(x2, box.x2), min(y2, box.y2)
    return BoundingBox(x1, y1, x2, y2)


def squares(tube: FaceTube) -> FaceTube:
    return FaceTube(tuple((i, largest_centered_square(b)) for i, b in tube.frames))


def fit_side_lengths(sides):
    """Least-squares constant and linear fits against frame position.

    Returns ``(mean, slope, intercept)``.
    """
    s = np.asarray(sides, dtype=np.float64)
    n = len(s)
    mean = float(s.mean())
    if n < 2:
        return mean, 0.0, mean
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    slope = float(np.dot(tc, s - mean) / np.dot(tc, tc))
    intercept = mean - slope * t.mean()
    return mean, slope, intercept


def stabilize_side_lengths(tube: FaceTube, cfg: SmoothingConfig = SmoothingConfig()) -> FaceTube:
    """Replace square side lengths by a constant or linear fit.

    The linear fit is used when ``|slope| * n_frames`` exceeds the threshold.
    Tubes with fewer than two frames always get the constant fit.
    """
    if len(tube) == 0:
        raise FacetubeError("cannot stabilise an empty facetube")
    c = tube.coords()
    sides = np.minimum(c[:, 2] - c[:, 0], c[:, 3] - c[:, 1])
    n = len(sides)
    mean, slope, intercept = fit_side_lengths(sides)
    if n >= 2 and abs(slope) * n > cfg.slope_threshold:
        new = intercept + slope * np.arange(n, dtype=np.float64)
    else:
        new = np.full(n, mean)
        if np.all(sides == sides[0]):
            new = sides.copy()
    new = np.maximum(new, 1e-6)
    unchanged = new == sides
    centers = (c[:, :2] + c[:, 2:]) / 2.0
    h = new[:, None] / 2.0
    out = np.hstack([centers - h, centers + h])
    out[unchanged] = c[unchanged]
    return FaceTube.from_coords(tube.indices, out)


def stabilize_tube(tube: FaceTube, cfg: SmoothingConfig = SmoothingConfig()) -> FaceTube:
    """Full smoothing chain: moving average, centred squares, side fit."""
    return stabilize_side_lengths(squares(smooth_corners_and_centers(tube, cfg)), cfg)


def clamp_box(box: BoundingBox, width, height, frame_index=None) -> BoundingBox:
    x1, y1 = max(box.x1, 0.0), max(box.y1, 0.0)
    x2, y2 = min(box.x2, float(width)), min(box.y2, float(height))
    if not (x2 > x1 and y2 > y1):
        where = f" at frame {frame_index}" if frame_index is not None else ""
        raise FacetubeError(f"box {box.as_array().tolist()} lies outside the {width}x{height} frame{where}")
    return BoundingBox(x1, y1, x2, y2)


def _sample_axis(start, length, out_size, limit):
    # pixel-centre alignment: output centre k maps to start + (k + .5) * scale - .5
    pos = start + (np.arange(out_size) + 0.5) * (length / out_size) - 0.5
    pos = np.clip(pos, 0.0, limit - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, limit - 1)
    frac = pos - lo
    return lo, hi, frac


def bilinear_crop(image, box: BoundingBox, out_h, out_w=None):
    """Resample ``box`` of a 2-D image to ``out_h x out_w`` bilinearly."""
    img = np.asarray(image, dtype=np.float64)
    out_w = out_h if out_w is None else out_w
    H, W = img.shape
    y0, y1i, fy = _sample_axis(box.y1, box.height, out_h, H)
    x0, x1i, fx = _sample_axis(box.x1, box.width, out_w, W)
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1i] * fx
    bot = img[y1i][:, x0] * (1 - fx) + img[y1i][:, x1i] * fx
    return top * (1 - fy)[:, None] + bot * fy[:, None]


def crop_facetube(frames, tube: FaceTube, cfg: SmoothingConfig = SmoothingConfig()):
    """Crop each tube box out of its frame and resize to ``output_size``.

    ``frames`` is indexed by frame index (sequence or mapping). Boxes are
    clamped to the frame before cropping.
    """
    out = []
    for idx, box in tube.frames:
        try:
            img = np.asarray(frames[idx], dtype=np.float64)
        except (IndexError, KeyError):
            raise FacetubeError(f"no image for frame {idx}") from None
        H, W = img.shape
        b = clamp_box(box, W, H, idx)
        out.append(bilinear_crop(img, b, cfg.output_size))
    return out


def select_primary_tube(tubes: Sequence[FaceTube]) -> FaceTube:
    """Tube with the largest mean box area (first one on ties)."""
    if not tubes:
        raise FacetubeError("no facetubes to choose from")
    areas = [t.mean_area() for t in tubes]
    return tubes[int(np.argmax(areas))]


TUBE_HEADER = ["frame_idx", "x1", "y1", "x2", "y2"]


def read_tube_csv(path) -> FaceTube:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TUBE_HEADER:
            raise FacetubeError(f"{path}: header must be {','.join(TUBE_HEADER)}")
        for row in reader:
            if not row:
                continue
            if len(row) != 5:
                raise FacetubeError(f"{path}:{reader.line_num}: expected 5 columns")
            try:
                rows.append((int(row[0]), BoundingBox(*(float(v) for v in row[1:]))))
            except ValueError as exc:
                raise FacetubeError(f"{path}:{reader.line_num}: {exc}") from None
    try:
        return FaceTube(tuple(rows))
    except FacetubeError as exc:
        raise FacetubeError(f"{path}: {exc}") from None


def write_tube_csv(tube: FaceTube, path):
    lines = [",".join(TUBE_HEADER)]
    for i, b in tube.frames:
        lines.append(",".join([str(i)] + [format_float(v) for v in b.as_array()]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    """8-bit binary (P5) PGM."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FacetubeError(f"{path}: not a binary PGM (P5)")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise FacetubeError(f"{path}: only 8-bit PGM is supported")
    pos += 1
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return pix.reshape(h, w).copy()


def write_pgm(path, image):
    img = np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)
    h, w = img.shape
    atomic_write_bytes(path, f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())


_FRAME_RE = re.compile(r"^(?P<clip>.+)_(?P<frame>\d+)\.pgm$")


def read_pgm_sequence(directory, clip_id=None):
    """``<clip>_<frame>.pgm`` files in a directory, as {clip: {frame: image}}."""
    out = {}
    for p in sorted(Path(directory).glob("*.pgm")):
        m = _FRAME_RE.match(p.name)
        if not m:
            continue
        if clip_id is not None and m["clip"] != clip_id:
            continue
        out.setdefault(m["clip"], {})[int(m["frame"])] = read_pgm(p)
    return out
