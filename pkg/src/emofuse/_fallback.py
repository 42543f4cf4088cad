"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

The arithmetic is ordered exactly as in the extension so the two backends
return identical floats. Selection loops in ``smo_solve`` are vectorised;
only the outer iteration is a Python loop.
"""

import numpy as np

TAU = 1e-12


def smo_solve(Q, y, C, eps, max_iter):
    n = Q.shape[0]
    alpha = np.zeros(n)
    G = np.full(n, -1.0)
    pos = y > 0
    diag = Q.diagonal().copy()
    it = 0
    gap = 0.0
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        minus_yg = np.where(pos, -G, G)
        if up.any():
            cand = np.where(up, minus_yg, -np.inf)
            i = int(np.argmax(cand))
            gmax = cand[i]
            if gmax == -np.inf:
                i = -1
        else:
            i, gmax = -1, -np.inf
        j = -1
        gmax2 = -np.inf
        if low.any():
            gmax2 = float(np.max(np.where(low, -minus_yg, -np.inf)))
            if i >= 0:
                # grad_diff = gmax + y_t G_t over I_low
                grad_diff = gmax - minus_yg
                ok = low & (grad_diff > 0)
                if ok.any():
                    quad = np.where(pos, diag[i] + diag - 2.0 * y[i] * Q[i],
                                    diag[i] + diag + 2.0 * y[i] * Q[i])
                    quad = np.where(quad <= 0, TAU, quad)
                    obj = np.where(ok, -(grad_diff * grad_diff) / quad, np.inf)
                    j = int(np.argmin(obj))
                    if obj[j] == np.inf:
                        j = -1
        gap = gmax + gmax2
        if gap < eps or j < 0 or i < 0:
            break
        it += 1

        old_ai, old_aj = alpha[i], alpha[j]
        ai, aj = old_ai, old_aj
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = ai + aj
            ai -= delta
            aj += delta
            if s > C:
                if ai > C:
                    ai = C
                    aj = s - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = s
            if s > C:
                if aj > C:
                    aj = C
                    ai = s - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = s
        alpha[i], alpha[j] = ai, aj
        dai = ai - old_ai
        daj = aj - old_aj
        G = G + (Q[i] * dai + Q[j] * daj)

    return alpha, _rho(alpha, G, y, C), it, float(gap)


def _rho(alpha, G, y, C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].sum() / free.sum())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def assign_nearest(X, C, chunk=2048):
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for start in range(0, n, chunk):
        x = X[start:start + chunk]
        acc = np.zeros((x.shape[0], C.shape[0]))
        # coordinate-by-coordinate accumulation, as in the compiled loop
        for q in range(X.shape[1]):
            diff = x[:, q, None] - C[None, :, q]
            acc = acc + diff * diff
        lab = np.argmin(acc, axis=1)
        labels[start:start + chunk] = lab
        dist[start:start + chunk] = acc[np.arange(x.shape[0]), lab]
    return labels, dist


def fuse_scores(P, W):
    out = np.zeros(P.shape[1:])
    for m in range(P.shape[0]):
        out = out + W[None, :, m] * P[m]
    return out


def count_correct(P, Ws, gold, chunk=64):
    B = Ws.shape[0]
    counts = np.zeros(B, dtype=np.int64)
    for start in range(0, B, chunk):
        w = Ws[start:start + chunk]
        scores = np.zeros((w.shape[0],) + P.shape[1:])
        for m in range(P.shape[0]):
            scores = scores + w[:, None, :, m] * P[m][None]
        pred = np.argmax(scores, axis=2)
        counts[start:start + chunk] = (pred == gold[None, :]).sum(axis=1)
    return counts
