# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sequential-assignment loops.

Mirrors ``seqate._kernels_py`` operation for operation so both back ends
emit bit-identical traces.
"""

cdef enum:
    CONSTANT = 0
    WEI_LINEAR = 1
    EFRON = 2


def assign_batch(int kind, double param, double delta,
                 const double[:, ::1] u, double[:, ::1] p_out,
                 unsigned char[:, ::1] k_out):
    cdef Py_ssize_t reps = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t r, i
    cdef long long d
    cdef double p, ratio, hi = 1.0 - delta, q = 1.0 - param
    for r in range(reps):
        d = 0
        for i in range(n):
            if kind == WEI_LINEAR:
                if i == 0:
                    ratio = 0.0
                else:
                    ratio = <double>d / <double>i
                p = 0.5 * (1.0 - ratio)
                if p < delta:
                    p = delta
                if p > hi:
                    p = hi
            elif kind == EFRON:
                if d < 0:
                    p = param
                elif d > 0:
                    p = q
                else:
                    p = 0.5
            else:
                p = param
            p_out[r, i] = p
            if u[r, i] < p:
                k_out[r, i] = 1
                d += 1
            else:
                k_out[r, i] = 0
                d -= 1


def efron_chain(double eta, const double[::1] u, long long[::1] d_out):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef long long d = 0
    cdef double p, q = 1.0 - eta
    for i in range(n):
        if d < 0:
            p = eta
        elif d > 0:
            p = q
        else:
            p = 0.5
        if u[i] < p:
            d += 1
        else:
            d -= 1
        d_out[i] = d
