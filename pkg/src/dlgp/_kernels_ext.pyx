# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled squared-exponential kernels.

Same contracts as ``dlgp._kernels_py``. The symmetric routines visit each
unordered pair once, which halves the number of ``exp`` calls.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def se_gram(const double[::1] x, const double[::1] x2, double lengthscale):
    cdef Py_ssize_t n = x.shape[0], m = x2.shape[0], i, j
    cdef double inv = 1.0 / lengthscale, d
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                d = (x[i] - x2[j]) * inv
                o[i, j] = exp(-0.5 * d * d)
    return out


def se_gram_sym(const double[::1] x, double lengthscale):
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef double inv = 1.0 / lengthscale, d, k
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            o[i, i] = 1.0
            for j in range(i + 1, n):
                d = (x[i] - x[j]) * inv
                k = exp(-0.5 * d * d)
                o[i, j] = k
                o[j, i] = k
    return out


def se_grad_contract(const double[::1] x, const double[:, ::1] weights,
                     double lengthscale):
    cdef Py_ssize_t n = x.shape[0], i, j
    cdef double inv2 = 1.0 / (lengthscale * lengthscale), diff, g
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                diff = x[i] - x[j]
                g = -diff * inv2 * exp(-0.5 * diff * diff * inv2)
                o[i] += weights[i, j] * g
                o[j] -= weights[j, i] * g
    return out
