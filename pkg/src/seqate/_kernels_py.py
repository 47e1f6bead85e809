"""Pure-numpy implementations of the sequential-assignment loops.

The loop over units is inherently sequential; replications are vectorised
across the leading axis instead.
"""
import numpy as np

CONSTANT = 0
WEI_LINEAR = 1
EFRON = 2


def assign_batch(kind, param, delta, u, p_out, k_out):
    reps, n = u.shape
    d = np.zeros(reps, dtype=np.int64)
    hi = 1.0 - delta
    q = 1.0 - param
    for i in range(n):
        if kind == WEI_LINEAR:
            if i == 0:
                p = np.full(reps, 0.5)
            else:
                p = 0.5 * (1.0 - d / float(i))
                p = np.minimum(np.maximum(p, delta), hi)
        elif kind == EFRON:
            p = np.where(d < 0, param, np.where(d > 0, q, 0.5))
        else:
            p = np.full(reps, param)
        k = u[:, i] < p
        p_out[:, i] = p
        k_out[:, i] = k
        d += 2 * k.astype(np.int64) - 1


def efron_chain(eta, u, d_out):
    q = 1.0 - eta
    d = 0
    for i, ui in enumerate(u.tolist()):
        if d < 0:
            p = eta
        elif d > 0:
            p = q
        else:
            p = 0.5
        d = d + 1 if ui < p else d - 1
        d_out[i] = d
