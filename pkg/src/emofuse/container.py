"""On-disk container for models, transforms and feature matrices.

A container is a directory holding ``header.json`` plus, for every array,
``<name>.bin`` (float32, little-endian, row-major) and ``<name>.json``
(``{"rows": r, "cols": c}``). Feature matrices use the same pair with an
extra ``clip_id`` key in the sidecar.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

_DTYPE = np.dtype("<f4")


def dump_json(obj, path):
    """Write JSON atomically with sorted keys so reruns are byte-identical."""
    path = Path(path)
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    atomic_write_text(path, text)


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path_stem, array, **meta):
    """Store a 1-D or 2-D array as ``<stem>.bin`` + ``<stem>.json``."""
    a = np.asarray(array, dtype=np.float64)
    if a.ndim == 1:
        rows, cols = 1, a.shape[0]
    elif a.ndim == 2:
        rows, cols = a.shape
    else:
        raise ValueError(f"only 1-D/2-D arrays are stored, got {a.ndim}-D")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"refusing to store non-finite values in {path_stem}")
    stem = Path(path_stem)
    atomic_write_bytes(stem.with_suffix(".bin"), a.astype(_DTYPE).tobytes(order="C"))
    dump_json({"rows": int(rows), "cols": int(cols), **meta}, stem.with_suffix(".json"))


def read_matrix(path_stem, with_meta=False):
    stem = Path(path_stem)
    if stem.suffix in (".bin", ".json"):
        stem = stem.with_suffix("")
    meta = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    rows, cols = int(meta["rows"]), int(meta["cols"])
    raw = np.fromfile(stem.with_suffix(".bin"), dtype=_DTYPE)
    if raw.size != rows * cols:
        raise ValueError(f"{stem}.bin holds {raw.size} floats, sidecar says {rows}x{cols}")
    a = raw.astype(np.float64).reshape(rows, cols)
    return (a, meta) if with_meta else a


def save_container(directory, header: dict, arrays: dict):
    """Write ``header.json`` and one matrix pair per entry of ``arrays``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        shapes[name] = list(arr.shape)
        write_matrix(directory / name, arr.reshape(arr.shape[0], -1) if arr.ndim > 2 else arr)
    dump_json({**header, "arrays": shapes}, directory / "header.json")


def load_container(directory):
    directory = Path(directory)
    header = json.loads((directory / "header.json").read_text(encoding="utf-8"))
    arrays = {}
    for name, shape in header.get("arrays", {}).items():
        arrays[name] = read_matrix(directory / name).reshape(shape)
    return header, arrays


def write_feature_matrix(directory, clip_id, A):
    write_matrix(Path(directory) / clip_id, A, clip_id=clip_id)


def read_feature_dir(directory):
    """All ``<clip>.bin``/``<clip>.json`` matrices in a directory, by clip id."""
    out = {}
    for meta_path in sorted(Path(directory).glob("*.json")):
        A, meta = read_matrix(meta_path.with_suffix(""), with_meta=True)
        out[meta.get("clip_id", meta_path.stem)] = A
    return out
