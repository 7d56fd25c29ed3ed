"""Pure-numpy kernels: transducer lattice recursions and alignment DP.

Drop-in fallback for the compiled module; same signatures, same results
(up to floating-point rounding in the last ulp for the lattice maths).
The lattice recursions run along anti-diagonals so the inner work stays
vectorised.
"""

import numpy as np

NEG_INF = -np.inf


def _forward(lp_blank, lp_y):
    T, U1 = lp_blank.shape
    U = U1 - 1
    alpha = np.full((T, U1), NEG_INF)
    alpha[0, 0] = 0.0
    for d in range(1, T + U):
        t0, t1 = max(0, d - U), min(T - 1, d)
        if t0 > t1:
            continue
        t = np.arange(t0, t1 + 1)
        u = d - t
        via_blank = np.full(t.shape, NEG_INF)
        m = t > 0
        via_blank[m] = alpha[t[m] - 1, u[m]] + lp_blank[t[m] - 1, u[m]]
        via_label = np.full(t.shape, NEG_INF)
        m = u > 0
        via_label[m] = alpha[t[m], u[m] - 1] + lp_y[t[m], u[m] - 1]
        alpha[t, u] = np.logaddexp(via_blank, via_label)
    return alpha


def rnnt_loglike(lp_blank, lp_y):
    """Log-probability of the target given per-cell blank/label log-probs.

    lp_blank: (T, U+1) log-prob of emitting blank at lattice cell (t, u).
    lp_y: (T, U) log-prob of emitting target symbol u at cell (t, u).
    """
    T, U1 = lp_blank.shape
    alpha = _forward(lp_blank, lp_y)
    return float(alpha[T - 1, U1 - 1] + lp_blank[T - 1, U1 - 1])


def rnnt_grad(lp_blank, lp_y):
    """Loglike plus gradients of the negative log-likelihood.

    Returns (loglike, g_blank, g_y) where g_* has the shape of the
    corresponding input and holds d(-loglike)/d(entry).
    """
    T, U1 = lp_blank.shape
    U = U1 - 1
    alpha = _forward(lp_blank, lp_y)
    # beta_ext[t, u]: log-prob of completing from cell (t, u); row T is the
    # exit boundary (reachable only at u == U).
    beta_ext = np.full((T + 1, U1), NEG_INF)
    beta_ext[T, U] = 0.0
    for d in range(T + U - 1, -1, -1):
        t0, t1 = max(0, d - U), min(T - 1, d)
        if t0 > t1:
            continue
        t = np.arange(t0, t1 + 1)
        u = d - t
        via_blank = lp_blank[t, u] + beta_ext[t + 1, u]
        via_label = np.full(t.shape, NEG_INF)
        m = u < U
        via_label[m] = lp_y[t[m], u[m]] + beta_ext[t[m], u[m] + 1]
        beta_ext[t, u] = np.logaddexp(via_blank, via_label)
    loglike = float(beta_ext[0, 0])
    g_blank = -np.exp(alpha + lp_blank + beta_ext[1:, :] - loglike)
    g_y = -np.exp(alpha[:, :U] + lp_y + beta_ext[:T, 1:] - loglike)
    return loglike, g_blank, g_y


def levenshtein_align(ref_ids, hyp_ids):
    """Minimum-edit alignment between two int sequences.

    Returns (matches, subs, dels, ins, ops) where ops is a uint8 array of
    edit operations from the start of the sequences (0=match, 1=sub,
    2=del, 3=ins).  Backtrace tie-break prefers match > sub > del > ins.
    """
    ref_ids = np.asarray(ref_ids, dtype=np.int32)
    hyp_ids = np.asarray(hyp_ids, dtype=np.int32)
    n, m = len(ref_ids), len(hyp_ids)
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    d[0] = np.arange(m + 1, dtype=np.int32)
    cols = np.arange(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        prev = d[i - 1]
        cost = (hyp_ids != ref_ids[i - 1]).astype(np.int32)
        cand = np.minimum(prev[:-1] + cost, prev[1:] + 1)
        # row[j] = min(cand[j-1], row[j-1] + 1) with row[0] = i, via a
        # prefix-min scan of cand[k] - k.
        full = np.concatenate(([np.int32(i)], cand))
        d[i] = cols + np.minimum.accumulate(full - cols)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        here = d[i, j]
        if i > 0 and j > 0 and ref_ids[i - 1] == hyp_ids[j - 1] and d[i - 1, j - 1] == here:
            ops.append(0)
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i - 1, j - 1] + 1 == here:
            ops.append(1)
            i -= 1
            j -= 1
        elif i > 0 and d[i - 1, j] + 1 == here:
            ops.append(2)
            i -= 1
        else:
            ops.append(3)
            j -= 1
    ops.reverse()
    ops = np.asarray(ops, dtype=np.uint8)
    matches = int(np.count_nonzero(ops == 0))
    subs = int(np.count_nonzero(ops == 1))
    dels = int(np.count_nonzero(ops == 2))
    ins = int(np.count_nonzero(ops == 3))
    return matches, subs, dels, ins, ops
