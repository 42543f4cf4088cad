"""Emotion labels, class distributions, prediction sets and metrics.

Everything downstream exchanges predictions as :class:`PredictionSet`
objects: per-clip 7-way scores in the fixed label order below, with an
optional gold label and a split tag per clip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import io

import numpy as np

from .container import atomic_write_text

EMOTIONS = ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise")
N_CLASSES = len(EMOTIONS)
LABEL_INDEX = {name: i for i, name in enumerate(EMOTIONS)}
SPLITS = ("train", "valid", "test", "other")

CSV_HEADER = ["clip_id", "split", "gold"] + [f"p_{e}" for e in EMOTIONS]

# distributions read from files are renormalised within this slack
READ_SUM_TOLERANCE = 1e-3
NORMALIZED_TOLERANCE = 1e-6


class InvalidDistributionError(ValueError):
    pass


class PredictionFormatError(ValueError):
    """Malformed prediction file; carries the offending line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class MissingGoldError(ValueError):
    def __init__(self, clip_id):
        self.clip_id = clip_id
        super().__init__(f"clip {clip_id!r} has no gold label")


def label_index(label) -> int:
    if isinstance(label, (int, np.integer)):
        if not 0 <= int(label) < N_CLASSES:
            raise ValueError(f"label index out of range: {label}")
        return int(label)
    try:
        return LABEL_INDEX[str(label).strip().lower()]
    except KeyError:
        raise ValueError(f"unknown emotion label {label!r}") from None


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ClassDistribution:
    """Seven non-negative scores in :data:`EMOTIONS` order.

    ``normalized`` is False for raw fused scores, which need not sum to 1.
    """

    p: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        p = _frozen(self.p)
        if p.shape != (N_CLASSES,):
            raise InvalidDistributionError(f"expected {N_CLASSES} scores, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidDistributionError("distribution has non-finite entries")
        if np.any(p < 0):
            raise InvalidDistributionError("distribution has negative entries")
        if self.normalized and abs(p.sum() - 1.0) > NORMALIZED_TOLERANCE:
            raise InvalidDistributionError(f"scores sum to {p.sum():.9g}, expected 1")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls):
        return cls(np.full(N_CLASSES, 1.0 / N_CLASSES))

    @classmethod
    def one_hot(cls, label):
        p = np.zeros(N_CLASSES)
        p[label_index(label)] = 1.0
        return cls(p)

    @property
    def label(self) -> str:
        return argmax_label(self)

    def __eq__(self, other):
        if not isinstance(other, ClassDistribution):
            return NotImplemented
        return self.normalized == other.normalized and np.array_equal(self.p, other.p)

    __hash__ = None


def argmax_label(dist) -> str:
    """Label with the largest score; the lowest index wins ties."""
    p = dist.p if isinstance(dist, ClassDistribution) else np.asarray(dist, dtype=np.float64)
    if p.shape != (N_CLASSES,) or not np.all(np.isfinite(p)):
        raise InvalidDistributionError("argmax needs 7 finite scores")
    return EMOTIONS[int(np.argmax(p))]


@dataclass(frozen=True)
class PredictionSet:
    """Per-clip class scores.

    ``probs`` is an (n, 7) array; ``gold`` holds label indices with -1 for
    unlabelled clips; ``splits`` tags each clip. Instances are read-only.
    """

    clip_ids: tuple
    probs: np.ndarray
    gold: np.ndarray = None
    splits: tuple = None
    normalized: bool = True
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = tuple(str(c) for c in self.clip_ids)
        n = len(ids)
        probs = _frozen(self.probs).reshape(n, N_CLASSES) if n else np.zeros((0, N_CLASSES))
        probs.setflags(write=False)
        if not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("prediction set has non-finite scores")
        if np.any(probs < 0):
            raise InvalidDistributionError("prediction set has negative scores")
        if self.normalized and n and np.max(np.abs(probs.sum(axis=1) - 1.0)) > NORMALIZED_TOLERANCE:
            raise InvalidDistributionError("rows flagged normalized do not sum to 1")
        gold = np.full(n, -1, dtype=np.int64) if self.gold is None else np.array(
            [g if isinstance(g, (int, np.integer)) else
             (-1 if g is None or g == "" else label_index(g)) for g in self.gold],
            dtype=np.int64).reshape(n)
        if np.any((gold < -1) | (gold >= N_CLASSES)):
            raise ValueError("gold label index out of range")
        gold.setflags(write=False)
        if self.splits is None:
            splits = ("other",) * n
        elif isinstance(self.splits, str):
            splits = (self.splits,) * n
        else:
            splits = tuple(self.splits)
        if len(splits) != n:
            raise ValueError("one split tag per clip required")
        bad = set(splits) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split tag(s): {sorted(bad)}")
        index = {}
        for i, c in enumerate(ids):
            if c in index:
                raise ValueError(f"duplicate clip_id {c!r}")
            index[c] = i
        object.__setattr__(self, "clip_ids", ids)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "gold", gold)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.clip_ids)

    def __iter__(self) -> Iterator[tuple]:
        for i, c in enumerate(self.clip_ids):
            g = int(self.gold[i])
            yield c, ClassDistribution(self.probs[i], self.normalized), (EMOTIONS[g] if g >= 0 else None)

    def __eq__(self, other):
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (self.clip_ids == other.clip_ids and self.splits == other.splits
                and self.normalized == other.normalized
                and np.array_equal(self.gold, other.gold)
                and np.array_equal(self.probs, other.probs))

    __hash__ = None

    @property
    def split(self) -> str:
        """The common split tag, or ``"other"`` for a mixed set."""
        tags = set(self.splits)
        return tags.pop() if len(tags) == 1 else "other"

    @property
    def has_gold(self) -> bool:
        return bool(len(self)) and bool(np.all(self.gold >= 0))

    def index_of(self, clip_id) -> int:
        return self._index[clip_id]

    def __contains__(self, clip_id):
        return clip_id in self._index

    def distribution(self, clip_id) -> ClassDistribution:
        return ClassDistribution(self.probs[self._index[clip_id]], self.normalized)

    def predicted(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)

    def take(self, indices) -> "PredictionSet":
        idx = np.asarray(indices, dtype=np.int64)
        return PredictionSet(tuple(self.clip_ids[i] for i in idx), self.probs[idx],
                             self.gold[idx], tuple(self.splits[i] for i in idx),
                             self.normalized)

    def select(self, split) -> "PredictionSet":
        return self.take([i for i, s in enumerate(self.splits) if s == split])

    def reorder(self, clip_ids: Sequence[str]) -> "PredictionSet":
        return self.take([self._index[c] for c in clip_ids])

    def with_split(self, split) -> "PredictionSet":
        return PredictionSet(self.clip_ids, self.probs, self.gold, split, self.normalized)

    def with_gold(self, gold) -> "PredictionSet":
        return PredictionSet(self.clip_ids, self.probs, gold, self.splits, self.normalized)

    def normalize(self) -> "PredictionSet":
        """Rows divided by their sums (argmax is unchanged)."""
        s = self.probs.sum(axis=1, keepdims=True)
        if np.any(s <= 0):
            raise InvalidDistributionError("cannot normalize an all-zero row")
        return PredictionSet(self.clip_ids, self.probs / s, self.gold, self.splits, True)

    @classmethod
    def concat(cls, sets: Iterable["PredictionSet"]) -> "PredictionSet":
        sets = list(sets)
        if not sets:
            return cls((), np.zeros((0, N_CLASSES)))
        return cls(sum((s.clip_ids for s in sets), ()),
                   np.vstack([s.probs for s in sets]),
                   np.concatenate([s.gold for s in sets]),
                   sum((s.splits for s in sets), ()),
                   all(s.normalized for s in sets))

    @classmethod
    def from_entries(cls, entries, split="other"):
        """Build from ``(clip_id, dist, gold)`` triples."""
        entries = list(entries)
        ids = [e[0] for e in entries]
        probs = [e[1].p if isinstance(e[1], ClassDistribution) else e[1] for e in entries]
        normalized = all(getattr(e[1], "normalized", True) for e in entries)
        gold = [e[2] if len(e) > 2 else None for e in entries]
        return cls(tuple(ids), np.array(probs, dtype=np.float64).reshape(len(ids), N_CLASSES),
                   gold, split, normalized)


def _require_gold(preds: PredictionSet):
    missing = np.flatnonzero(preds.gold < 0)
    if missing.size:
        raise MissingGoldError(preds.clip_ids[missing[0]])


def accuracy(preds: PredictionSet) -> float:
    if len(preds) == 0:
        raise ValueError("accuracy of an empty prediction set")
    _require_gold(preds)
    return float(np.mean(preds.predicted() == preds.gold))


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray

    @property
    def row_normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(rows > 0, self.counts / np.maximum(rows, 1), 0.0)
        return out

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)


def confusion(preds: PredictionSet) -> ConfusionMatrix:
    """Rows are gold labels, columns predictions."""
    if len(preds) == 0:
        raise ValueError("confusion matrix of an empty prediction set")
    _require_gold(preds)
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (preds.gold, preds.predicted()), 1)
    counts.setflags(write=False)
    return ConfusionMatrix(counts)


def format_float(x) -> str:
    return format(float(x), ".9g")


def write_predictions(preds: PredictionSet, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i, c in enumerate(preds.clip_ids):
        g = int(preds.gold[i])
        w.writerow([c, preds.splits[i], EMOTIONS[g] if g >= 0 else ""]
                   + [format_float(v) for v in preds.probs[i]])
    atomic_write_text(path, buf.getvalue())


def read_predictions(path) -> PredictionSet:
    """Parse a prediction CSV.

    Rows whose scores sum to within 1e-3 of 1 are accepted and, when off by
    more than 1e-6, renormalised; others are rejected.
    """
    path = Path(path)
    ids, probs, gold, splits = [], [], [], []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionFormatError("empty file, header required", 1, path) from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise PredictionFormatError(f"bad header, expected {','.join(CSV_HEADER)}", 1, path)
        for row in reader:
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise PredictionFormatError(
                    f"expected {len(CSV_HEADER)} columns, got {len(row)}", line, path)
            clip, split, g = row[0].strip(), row[1].strip(), row[2].strip()
            if not clip:
                raise PredictionFormatError("empty clip_id", line, path)
            if clip in seen:
                raise PredictionFormatError(
                    f"duplicate clip_id {clip!r} (first on line {seen[clip]})", line, path)
            if split not in SPLITS:
                raise PredictionFormatError(f"unknown split {split!r}", line, path)
            try:
                gi = label_index(g) if g else -1
            except ValueError as exc:
                raise PredictionFormatError(str(exc), line, path) from None
            try:
                p = np.array([float(v) for v in row[3:]])
            except ValueError:
                raise PredictionFormatError("non-numeric probability", line, path) from None
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise PredictionFormatError("probabilities must be finite and >= 0", line, path)
            total = p.sum()
            if abs(total - 1.0) > READ_SUM_TOLERANCE:
                raise PredictionFormatError(f"probabilities sum to {total:.6g}", line, path)
            seen[clip] = line
            ids.append(clip)
            probs.append(p / total if abs(total - 1.0) > NORMALIZED_TOLERANCE else p)
            gold.append(gi)
            splits.append(split)
    return PredictionSet(tuple(ids), np.array(probs).reshape(len(ids), N_CLASSES),
                         np.array(gold, dtype=np.int64), tuple(splits), True)


def read_labels(path) -> dict:
    """``clip_id,split,gold`` CSV -> {clip_id: (split, label index or -1)}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["clip_id", "split", "gold"]:
            raise PredictionFormatError("labels file needs header clip_id,split,gold", 1, path)
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise PredictionFormatError("expected 3 columns", reader.line_num, path)
            clip, split, g = (f.strip() for f in row)
            if split not in SPLITS:
                raise PredictionFormatError(f"unknown split {split!r}", reader.line_num, path)
            if clip in out:
                raise PredictionFormatError(f"duplicate clip_id {clip!r}", reader.line_num, path)
            try:
                out[clip] = (split, label_index(g) if g else -1)
            except ValueError as exc:
                raise PredictionFormatError(str(exc), reader.line_num, path) from None
    return out


def write_labels(labels: dict, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clip_id", "split", "gold"])
    for clip, (split, g) in labels.items():
        w.writerow([clip, split, EMOTIONS[g] if g >= 0 else ""])
    atomic_write_text(path, buf.getvalue())


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)
