# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: transducer lattice recursions and alignment DP."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p

cnp.import_array()

cdef double NEG_INF = -float("inf")


cdef inline double logadd(double a, double b) noexcept nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef void _forward(double[:, ::1] lp_blank, double[:, ::1] lp_y,
                   double[:, ::1] alpha) noexcept nogil:
    cdef Py_ssize_t T = lp_blank.shape[0]
    cdef Py_ssize_t U1 = lp_blank.shape[1]
    cdef Py_ssize_t t, u
    cdef double via_blank, via_label
    for t in range(T):
        for u in range(U1):
            alpha[t, u] = NEG_INF
    alpha[0, 0] = 0.0
    for t in range(T):
        for u in range(U1):
            if t == 0 and u == 0:
                continue
            via_blank = NEG_INF
            via_label = NEG_INF
            if t > 0:
                via_blank = alpha[t - 1, u] + lp_blank[t - 1, u]
            if u > 0:
                via_label = alpha[t, u - 1] + lp_y[t, u - 1]
            alpha[t, u] = logadd(via_blank, via_label)


def rnnt_loglike(double[:, ::1] lp_blank, double[:, ::1] lp_y):
    """Log-probability of the target given per-cell blank/label log-probs."""
    cdef Py_ssize_t T = lp_blank.shape[0]
    cdef Py_ssize_t U1 = lp_blank.shape[1]
    alpha_arr = np.empty((T, U1), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    _forward(lp_blank, lp_y, alpha)
    return float(alpha[T - 1, U1 - 1] + lp_blank[T - 1, U1 - 1])


def rnnt_grad(double[:, ::1] lp_blank, double[:, ::1] lp_y):
    """Loglike plus gradients of the negative log-likelihood."""
    cdef Py_ssize_t T = lp_blank.shape[0]
    cdef Py_ssize_t U1 = lp_blank.shape[1]
    cdef Py_ssize_t U = U1 - 1
    alpha_arr = np.empty((T, U1), dtype=np.float64)
    beta_arr = np.empty((T + 1, U1), dtype=np.float64)
    g_blank_arr = np.empty((T, U1), dtype=np.float64)
    g_y_arr = np.empty((T, U), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta_ext = beta_arr
    cdef double[:, ::1] g_blank = g_blank_arr
    cdef double[:, ::1] g_y = g_y_arr
    cdef Py_ssize_t t, u
    cdef double via_blank, via_label, loglike

    _forward(lp_blank, lp_y, alpha)

    for u in range(U1):
        beta_ext[T, u] = NEG_INF
    beta_ext[T, U] = 0.0
    for t in range(T - 1, -1, -1):
        for u in range(U, -1, -1):
            via_blank = lp_blank[t, u] + beta_ext[t + 1, u]
            via_label = NEG_INF
            if u < U:
                via_label = lp_y[t, u] + beta_ext[t, u + 1]
            beta_ext[t, u] = logadd(via_blank, via_label)
    loglike = beta_ext[0, 0]

    for t in range(T):
        for u in range(U1):
            g_blank[t, u] = -exp(alpha[t, u] + lp_blank[t, u]
                                 + beta_ext[t + 1, u] - loglike)
            if u < U:
                g_y[t, u] = -exp(alpha[t, u] + lp_y[t, u]
                                 + beta_ext[t, u + 1] - loglike)
    return float(loglike), g_blank_arr, g_y_arr


def levenshtein_align(int[::1] ref_ids, int[::1] hyp_ids):
    """Minimum-edit alignment; see the pure-python twin for the contract."""
    cdef Py_ssize_t n = ref_ids.shape[0]
    cdef Py_ssize_t m = hyp_ids.shape[0]
    d_arr = np.empty((n + 1, m + 1), dtype=np.int32)
    cdef int[:, ::1] d = d_arr
    cdef Py_ssize_t i, j
    cdef int cost, best

    for j in range(m + 1):
        d[0, j] = <int> j
    for i in range(1, n + 1):
        d[i, 0] = <int> i
        for j in range(1, m + 1):
            cost = 0 if ref_ids[i - 1] == hyp_ids[j - 1] else 1
            best = d[i - 1, j - 1] + cost
            if d[i - 1, j] + 1 < best:
                best = d[i - 1, j] + 1
            if d[i, j - 1] + 1 < best:
                best = d[i, j - 1] + 1
            d[i, j] = best

    ops_arr = np.empty(n + m, dtype=np.uint8)
    cdef unsigned char[::1] ops = ops_arr
    cdef Py_ssize_t k = n + m
    cdef int matches = 0, subs = 0, dels = 0, ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        k -= 1
        if i > 0 and j > 0 and ref_ids[i - 1] == hyp_ids[j - 1] \
                and d[i - 1, j - 1] == d[i, j]:
            ops[k] = 0
            matches += 1
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i - 1, j - 1] + 1 == d[i, j]:
            ops[k] = 1
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i - 1, j] + 1 == d[i, j]:
            ops[k] = 2
            dels += 1
            i -= 1
        else:
            ops[k] = 3
            ins += 1
            j -= 1
    return matches, subs, dels, ins, ops_arr[k:].copy()
