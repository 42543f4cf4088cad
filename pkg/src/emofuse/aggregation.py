"""Fixed-length video descriptors from per-frame class probabilities.

A clip with ``T`` face frames becomes ten 7-blocks. Long clips are
contracted by averaging ten contiguous groups with boundaries
``floor(g * T / 10)``; short clips are expanded by copying frame
``floor(s * T / 10)`` into slot ``s``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .container import atomic_write_text
from .labels import EMOTIONS, N_CLASSES, NORMALIZED_TOLERANCE, format_float

N_SLOTS = 10
DESCRIPTOR_DIM = N_SLOTS * N_CLASSES


class AggregationError(ValueError):
    pass


@dataclass(frozen=True)
class FrameProbabilitySequence:
    clip_id: str
    rows: np.ndarray  # (T, 7)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64).reshape(-1, N_CLASSES)
        if rows.size and (np.any(rows < 0) or
                          np.max(np.abs(rows.sum(axis=1) - 1)) > NORMALIZED_TOLERANCE):
            raise AggregationError(f"clip {self.clip_id}: frame rows must be normalized distributions")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]


def group_bounds(T):
    """Start/stop row of each of the ten contraction groups."""
    return [(g * T // N_SLOTS, (g + 1) * T // N_SLOTS) for g in range(N_SLOTS)]


def expansion_sources(T):
    return [s * T // N_SLOTS for s in range(N_SLOTS)]


def contract(seq: FrameProbabilitySequence) -> np.ndarray:
    T = len(seq)
    if T < N_SLOTS:
        raise AggregationError(f"clip {seq.clip_id}: contract needs >= {N_SLOTS} frames, got {T}; use expand")
    return np.concatenate([seq.rows[a:b].mean(axis=0) for a, b in group_bounds(T)])


def expand(seq: FrameProbabilitySequence) -> np.ndarray:
    T = len(seq)
    if T == 0:
        raise AggregationError(f"clip {seq.clip_id}: empty frame sequence")
    if T >= N_SLOTS:
        raise AggregationError(f"clip {seq.clip_id}: expand is for < {N_SLOTS} frames, got {T}; use contract")
    return np.concatenate([seq.rows[i] for i in expansion_sources(T)])


def build_descriptor(seq: FrameProbabilitySequence) -> np.ndarray:
    """70-dim descriptor: contract for T >= 10, expand for 1 <= T < 10."""
    if len(seq) == 0:
        raise AggregationError(f"clip {seq.clip_id}: no frames with a detected face")
    return contract(seq) if len(seq) >= N_SLOTS else expand(seq)


FRAME_HEADER = ["clip_id", "frame_idx"] + [f"p_{e}" for e in EMOTIONS]
DESCRIPTOR_HEADER = ["clip_id"] + [f"v{i}" for i in range(DESCRIPTOR_DIM)]


def read_frame_probabilities(path):
    """Per-frame CSV -> list of sequences in first-appearance order, rows
    sorted by frame index."""
    clips = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != FRAME_HEADER:
            raise AggregationError(f"{path}: header must be {','.join(FRAME_HEADER)}")
        for row in reader:
            if not row:
                continue
            line = reader.line_num
            if len(row) != len(FRAME_HEADER):
                raise AggregationError(f"{path}:{line}: expected {len(FRAME_HEADER)} columns, got {len(row)}")
            clip = row[0].strip()
            if not clip:
                raise AggregationError(f"{path}:{line}: empty clip_id")
            try:
                frame = int(row[1])
                p = [float(v) for v in row[2:]]
            except ValueError:
                raise AggregationError(f"{path}:{line}: malformed number") from None
            frames = clips.setdefault(clip, {})
            if frame in frames:
                raise AggregationError(f"{path}:{line}: duplicate frame {frame} for clip {clip}")
            frames[frame] = p
    out = []
    for clip, frames in clips.items():
        rows = np.array([frames[k] for k in sorted(frames)])
        s = rows.sum(axis=1, keepdims=True)
        if np.any(np.abs(s - 1) > 1e-3) or np.any(rows < 0):
            raise AggregationError(f"{path}: clip {clip} has rows that are not distributions")
        out.append(FrameProbabilitySequence(clip, rows / s))
    return out


def write_frame_probabilities(seqs, path):
    lines = [",".join(FRAME_HEADER)]
    for seq in seqs:
        for t, row in enumerate(seq.rows):
            lines.append(",".join([seq.clip_id, str(t)] + [format_float(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def descriptors_to_csv_text(items):
    lines = [",".join(DESCRIPTOR_HEADER)]
    for clip, v in items:
        lines.append(",".join([clip] + [format_float(x) for x in v]))
    return "\n".join(lines) + "\n"


def read_descriptors(path):
    """Descriptor CSV -> (clip ids, (n, 70) array)."""
    ids, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DESCRIPTOR_HEADER:
            raise AggregationError(f"{path}: header must be clip_id,v0,...,v{DESCRIPTOR_DIM - 1}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(DESCRIPTOR_HEADER):
                raise AggregationError(f"{path}:{reader.line_num}: expected {len(DESCRIPTOR_HEADER)} columns")
            ids.append(row[0].strip())
            rows.append([float(v) for v in row[1:]])
    if len(set(ids)) != len(ids):
        raise AggregationError(f"{path}: duplicate clip_id")
    return ids, np.array(rows).reshape(len(ids), DESCRIPTOR_DIM)
