# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled numeric kernels for the sparse network equations.

Hot loops of the simulator: numeric LU refactorization on a fixed symbolic
pattern, the triangular solves run every inner iteration of every integration
step, and the complex matrix-vector product used by the power-flow mismatch.
"""

import numpy as np

cimport numpy as cnp

COMPILED = True


def lu_factor(const cnp.int64_t[::1] fp, const cnp.int64_t[::1] fi,
              double complex[::1] fx, const cnp.int64_t[::1] diag_pos,
              double tol):
    cdef Py_ssize_t n = fp.shape[0] - 1
    cdef cnp.ndarray w_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] w = w_arr
    cdef Py_ssize_t i, t, s, k, dk
    cdef double complex lik
    for i in range(n):
        for t in range(fp[i], fp[i + 1]):
            w[fi[t]] = fx[t]
        for t in range(fp[i], diag_pos[i]):
            k = fi[t]
            dk = diag_pos[k]
            lik = w[k] / fx[dk]
            w[k] = lik
            for s in range(dk + 1, fp[k + 1]):
                w[fi[s]] = w[fi[s]] - lik * fx[s]
        if abs(w[i]) <= tol:
            return i + 1
        for t in range(fp[i], fp[i + 1]):
            fx[t] = w[fi[t]]
    return 0


def lu_solve_permuted(const cnp.int64_t[::1] fp, const cnp.int64_t[::1] fi,
                      const double complex[::1] fx,
                      const cnp.int64_t[::1] diag_pos,
                      double complex[::1] y):
    cdef Py_ssize_t n = fp.shape[0] - 1
    cdef Py_ssize_t i, t
    cdef double complex acc
    for i in range(n):
        acc = y[i]
        for t in range(fp[i], diag_pos[i]):
            acc = acc - fx[t] * y[fi[t]]
        y[i] = acc
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for t in range(diag_pos[i] + 1, fp[i + 1]):
            acc = acc - fx[t] * y[fi[t]]
        y[i] = acc / fx[diag_pos[i]]


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double complex[::1] data, const double complex[::1] x,
               double complex[::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, t
    cdef double complex acc
    for i in range(n):
        acc = 0
        for t in range(indptr[i], indptr[i + 1]):
            acc = acc + data[t] * x[indices[t]]
        out[i] = acc
