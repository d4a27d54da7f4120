# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backward-induction kernel.

Mirrors _kernel_py.backward_pass: same expression structure and the same
first-minimum tie rule, so the two backends agree bit for bit.
"""

from libc.math cimport INFINITY

import numpy as np


def backward_pass(
    double[:, ::1] cost,                 # (N+1, M)
    double[:, ::1] action_kw,            # (N, M)
    const unsigned char[:, ::1] valid,   # (M, K)
    const long long[:, ::1] corner00,    # (M, K)
    const double[:, ::1] frac_e,         # (M, K)
    const double[:, ::1] frac_theta,     # (M, K)
    long long stride_e,
    long long stride_t,
    const double[:, ::1] jd,             # (M, K)
    const double[:, ::1] je,             # (N, K)
    const double[::1] p_d,               # (K,)
    double penalty,
):
    cdef Py_ssize_t n_steps = je.shape[0]
    cdef Py_ssize_t m = valid.shape[0]
    cdef Py_ssize_t n_actions = valid.shape[1]
    cdef Py_ssize_t n, cell, k, best_k, c00
    cdef double best, cand, fe, ft, lo, hi
    cdef const double* nxt

    with nogil:
        for n in range(n_steps - 1, -1, -1):
            nxt = &cost[n + 1, 0]
            for cell in range(m):
                best = INFINITY
                best_k = 0
                for k in range(n_actions):
                    if valid[cell, k]:
                        c00 = corner00[cell, k]
                        fe = frac_e[cell, k]
                        ft = frac_theta[cell, k]
                        lo = (1.0 - ft) * nxt[c00] + ft * nxt[c00 + stride_t]
                        hi = (1.0 - ft) * nxt[c00 + stride_e] + ft * nxt[c00 + stride_e + stride_t]
                        cand = (je[n, k] + jd[cell, k]) + ((1.0 - fe) * lo + fe * hi)
                    else:
                        cand = penalty
                    if cand < best:
                        best = cand
                        best_k = k
                cost[n, cell] = best
                action_kw[n, cell] = p_d[best_k]
