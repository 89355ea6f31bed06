# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled collision-tensor contraction (canonical index tuples only)."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, exp

cnp.import_array()


def contract_canonical(double[::1] q, double[::1] wq, double complex[:, :, :, ::1] u,
                       double[:, ::1] delta, long[:, ::1] labels,
                       double mass, double beta, double sigma_p, bint gaussian,
                       int n_threads):
    cdef Py_ssize_t d = delta.shape[0]
    cdef Py_ssize_t nq = q.shape[0]
    out = np.zeros((d, d, d, d), dtype=np.complex128)
    cdef double complex[:, :, :, ::1] S = out
    # node index last, so the inner loop streams through memory
    cdef double complex[:, :, :, ::1] ut = np.ascontiguousarray(np.transpose(u, (0, 2, 3, 1)))
    # incoming momentum per (out level, in level, node); negative marks a closed channel
    p2_np = np.asarray(q)[None, None, :] ** 2 + 2.0 * mass * np.asarray(delta)[:, :, None]
    cdef double[:, :, ::1] mom = np.ascontiguousarray(np.where(p2_np > 0, np.sqrt(np.abs(p2_np)), -1.0))
    cdef double[::1] wqq = np.ascontiguousarray(np.asarray(wq) * np.asarray(q))
    cdef Py_ssize_t a, b, c, e, i, row
    cdef double p, pi, mid, arg, two_m = 2.0 * mass, pref = beta / mass
    cdef double inv_two_sig2 = 0.0
    cdef double complex acc
    if gaussian:
        inv_two_sig2 = 1.0 / (2.0 * sigma_p * sigma_p)
    for row in prange(d * d, nogil=True, num_threads=n_threads, schedule="dynamic"):
        a = row // d
        b = row % d
        if labels[a, b] < 0:
            continue
        for c in range(d):
            for e in range(d):
                if a * d + b > c * d + e:
                    continue
                if labels[c, e] != labels[a, b]:
                    continue
                acc = 0.0
                for i in range(nq):
                    p = mom[a, b, i]
                    pi = mom[c, e, i]
                    if p < 0.0 or pi < 0.0:
                        continue
                    mid = 0.5 * (p + pi)
                    arg = beta * mid * mid / two_m + (p - pi) * (p - pi) * inv_two_sig2
                    acc = acc + (wqq[i] * pref * mid * exp(-arg)) * (
                        ut[0, a, b, i] * ut[0, c, e, i].conjugate()
                        + ut[1, a, b, i] * ut[1, c, e, i].conjugate())
                S[a, c, b, e] = acc
    return out
