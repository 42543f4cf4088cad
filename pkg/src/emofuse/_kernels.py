"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy twins
take over. Set ``EMOFUSE_BACKEND=python`` to force the fallback.
"""

import logging
import os

import numpy as np

from . import _fallback

log = logging.getLogger(__name__)

_backends = {"python": _fallback}
try:
    from . import _core
except ImportError:  # extension not built
    _core = None
else:
    _backends["compiled"] = _core

_requested = os.environ.get("EMOFUSE_BACKEND", "").strip().lower()
if _requested == "python" or _core is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"
if _requested == "compiled" and _core is None:
    log.warning("EMOFUSE_BACKEND=compiled requested but extension is not built")


def available_backends():
    return sorted(_backends)


def get_backend(name=None):
    return _backends[name or BACKEND]


def smo_solve(Q, y, C, eps, max_iter, backend=None):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return get_backend(backend).smo_solve(Q, y, float(C), float(eps), int(max_iter))


def assign_nearest(X, C, backend=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    return get_backend(backend).assign_nearest(X, C)


def fuse_scores(P, W, backend=None):
    P = np.ascontiguousarray(P, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    return get_backend(backend).fuse_scores(P, W)


def count_correct(P, Ws, gold, backend=None):
    P = np.ascontiguousarray(P, dtype=np.float64)
    Ws = np.ascontiguousarray(Ws, dtype=np.float64)
    gold = np.ascontiguousarray(gold, dtype=np.int64)
    return get_backend(backend).count_correct(P, Ws, gold)
