# cython: language_level=3
"""Compiled inner loops.

Every routine here has a numpy twin in ``_fallback`` that performs the same
floating point operations in the same order, so both backends agree bit for
bit on the same input (the extension is built with ``-ffp-contract=off``).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def smo_solve(const double[:, ::1] Q, const double[::1] y, double C, double eps,
              long max_iter):
    """Dual C-SVM solver with second-order working set selection.

    ``Q`` is the signed kernel matrix ``y_i y_j K(x_i, x_j)``. Returns
    ``(alpha, rho, n_iter, gap)`` where the decision function is
    ``sum_i alpha_i y_i K(x_i, x) - rho`` and ``gap`` is the final maximal
    KKT violation.
    """
    cdef Py_ssize_t n = Q.shape[0]
    alpha_arr = np.zeros(n, dtype=np.float64)
    grad_arr = np.full(n, -1.0, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = grad_arr
    cdef long it = 0
    cdef Py_ssize_t t, i, j
    cdef double gmax, gmax2, obj_min, grad_diff, quad, obj_diff
    cdef double old_ai, old_aj, delta, diff, s, dai, daj, gap = 0.0

    with nogil:
        while it < max_iter:
            # i: maximal violator in I_up
            gmax = -INFINITY
            i = -1
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] < C and -G[t] > gmax:
                        gmax = -G[t]
                        i = t
                else:
                    if alpha[t] > 0 and G[t] > gmax:
                        gmax = G[t]
                        i = t
            gmax2 = -INFINITY
            j = -1
            obj_min = INFINITY
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] > 0:
                        if G[t] > gmax2:
                            gmax2 = G[t]
                        if i >= 0:
                            grad_diff = gmax + G[t]
                            if grad_diff > 0:
                                quad = Q[i, i] + Q[t, t] - 2.0 * y[i] * Q[i, t]
                                if quad <= 0:
                                    quad = TAU
                                obj_diff = -(grad_diff * grad_diff) / quad
                                if obj_diff < obj_min:
                                    obj_min = obj_diff
                                    j = t
                else:
                    if alpha[t] < C:
                        if -G[t] > gmax2:
                            gmax2 = -G[t]
                        if i >= 0:
                            grad_diff = gmax - G[t]
                            if grad_diff > 0:
                                quad = Q[i, i] + Q[t, t] + 2.0 * y[i] * Q[i, t]
                                if quad <= 0:
                                    quad = TAU
                                obj_diff = -(grad_diff * grad_diff) / quad
                                if obj_diff < obj_min:
                                    obj_min = obj_diff
                                    j = t
            gap = gmax + gmax2
            if gap < eps or j < 0 or i < 0:
                break
            it += 1

            old_ai = alpha[i]
            old_aj = alpha[j]
            if y[i] != y[j]:
                quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
                if quad <= 0:
                    quad = TAU
                delta = (-G[i] - G[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0
                        alpha[i] = diff
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0
                        alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                else:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = C + diff
            else:
                quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
                if quad <= 0:
                    quad = TAU
                delta = (G[i] - G[j]) / quad
                s = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if s > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = s - C
                else:
                    if alpha[j] < 0:
                        alpha[j] = 0
                        alpha[i] = s
                if s > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = s - C
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0
                        alpha[j] = s

            dai = alpha[i] - old_ai
            daj = alpha[j] - old_aj
            for t in range(n):
                G[t] = G[t] + (Q[i, t] * dai + Q[j, t] * daj)

    rho = _rho(alpha_arr, grad_arr, np.asarray(y), C)
    return alpha_arr, rho, it, gap


def _rho(alpha, G, y, double C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].sum() / free.sum())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else INFINITY
    lb = yG[lb_mask].max() if lb_mask.any() else -INFINITY
    return float((ub + lb) / 2.0)


def assign_nearest(const double[:, ::1] X, const double[:, ::1] C):
    """Index of and squared distance to the nearest row of ``C`` for every
    row of ``X``. Distances are summed coordinate by coordinate; ties go to
    the lowest centroid index."""
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    labels_arr = np.empty(n, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] labels = labels_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t a, b, q, kb = k - k % 4
    cdef double best, acc, acc1, acc2, acc3, diff, xq
    cdef cnp.int64_t best_b
    with nogil:
        for a in range(n):
            best = INFINITY
            best_b = 0
            # four centroids at a time; each sum keeps its coordinate order
            for b in range(0, kb, 4):
                acc = 0.0
                acc1 = 0.0
                acc2 = 0.0
                acc3 = 0.0
                for q in range(d):
                    xq = X[a, q]
                    diff = xq - C[b, q]
                    acc = acc + diff * diff
                    diff = xq - C[b + 1, q]
                    acc1 = acc1 + diff * diff
                    diff = xq - C[b + 2, q]
                    acc2 = acc2 + diff * diff
                    diff = xq - C[b + 3, q]
                    acc3 = acc3 + diff * diff
                if acc < best:
                    best = acc
                    best_b = b
                if acc1 < best:
                    best = acc1
                    best_b = b + 1
                if acc2 < best:
                    best = acc2
                    best_b = b + 2
                if acc3 < best:
                    best = acc3
                    best_b = b + 3
            for b in range(kb, k):
                acc = 0.0
                for q in range(d):
                    diff = X[a, q] - C[b, q]
                    acc = acc + diff * diff
                if acc < best:
                    best = acc
                    best_b = b
            labels[a] = best_b
            dist[a] = best
    return labels_arr, dist_arr


def fuse_scores(const double[:, :, ::1] P, const double[:, ::1] W):
    """Per-class weighted sum of expert scores.

    ``P`` has shape (models, clips, classes), ``W`` (classes, models).
    """
    cdef Py_ssize_t M = P.shape[0], n = P.shape[1], K = P.shape[2]
    out_arr = np.zeros((n, K), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t a, c, m
    cdef double s
    with nogil:
        for a in range(n):
            for c in range(K):
                s = 0.0
                for m in range(M):
                    s = s + W[c, m] * P[m, a, c]
                out[a, c] = s
    return out_arr


def count_correct(const double[:, :, ::1] P, const double[:, :, ::1] Ws,
                  const cnp.int64_t[::1] gold):
    """Number of clips whose fused argmax equals ``gold``, for each weight
    matrix in the batch ``Ws`` of shape (batch, classes, models)."""
    cdef Py_ssize_t B = Ws.shape[0], M = P.shape[0], n = P.shape[1]
    cdef Py_ssize_t K = P.shape[2]
    counts_arr = np.zeros(B, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t b, a, c, m, arg
    cdef double s, best
    cdef cnp.int64_t hit
    with nogil:
        for b in range(B):
            hit = 0
            for a in range(n):
                best = -INFINITY
                arg = 0
                for c in range(K):
                    s = 0.0
                    for m in range(M):
                        s = s + Ws[b, c, m] * P[m, a, c]
                    if s > best:
                        best = s
                        arg = c
                if arg == gold[a]:
                    hit += 1
            counts[b] = hit
    return counts_arr
