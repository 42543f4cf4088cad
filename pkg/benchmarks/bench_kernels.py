"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends; outputs are
checked for exact equality before timing.
"""

import argparse
import time

import numpy as np

from emofuse import _kernels
from emofuse.classifiers import KernelConfig, gram


def _cases(rng):
    n = 300
    X = rng.normal(size=(n, 5))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    Q = np.ascontiguousarray(y[:, None] * y[None, :] * gram(KernelConfig("rbf", 0.5), X))
    P = rng.random((4, 500, 7))
    Ws = rng.random((256, 7, 4))
    Ws /= Ws.sum(axis=2, keepdims=True)
    gold = rng.integers(0, 7, 500)
    return {
        "smo_solve (n=300)": (_kernels.smo_solve, (Q, y, 1.0, 1e-3, 100_000)),
        "assign_nearest (20000x64, K=100)": (_kernels.assign_nearest,
                                             (rng.normal(size=(20000, 64)), rng.normal(size=(100, 64)))),
        "fuse_scores (M=4, n=500)": (_kernels.fuse_scores, (P, Ws[0])),
        "count_correct (256 candidates)": (_kernels.count_correct, (P, Ws, gold)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b


def _best_time(fn, args, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':36s} {'python ms':>10s} {'compiled ms':>12s} {'speedup':>8s}")
    for name, (fn, fargs) in _cases(rng).items():
        py = _best_time(fn, fargs, "python", args.repeat)
        if "compiled" in backends:
            if not _same(fn(*fargs, backend="python"), fn(*fargs, backend="compiled")):
                raise SystemExit(f"{name}: backends disagree")
            co = _best_time(fn, fargs, "compiled", args.repeat)
            print(f"{name:36s} {py * 1e3:10.2f} {co * 1e3:12.2f} {py / co:7.1f}x")
        else:
            print(f"{name:36s} {py * 1e3:10.2f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
