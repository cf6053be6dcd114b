# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise kernels: softmax, layer normalization, embedding scatter-add.

Same contracts as ``_kernels_py``; selected at import by ``kernels``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND = "compiled"


def softmax_fwd(cnp.float64_t[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], n = x.shape[1]
    out_arr = np.empty((rows, n), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] y = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s
    for i in range(rows):
        m = x[i, 0]
        for j in range(1, n):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(n):
            y[i, j] = exp(x[i, j] - m)
            s += y[i, j]
        for j in range(n):
            y[i, j] /= s
    return out_arr


def softmax_bwd(cnp.float64_t[:, ::1] y, cnp.float64_t[:, ::1] grad):
    cdef Py_ssize_t rows = y.shape[0], n = y.shape[1]
    out_arr = np.empty((rows, n), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] gx = out_arr
    cdef Py_ssize_t i, j
    cdef double inner
    for i in range(rows):
        inner = 0.0
        for j in range(n):
            inner += grad[i, j] * y[i, j]
        for j in range(n):
            gx[i, j] = y[i, j] * (grad[i, j] - inner)
    return out_arr


def layernorm_fwd(cnp.float64_t[:, ::1] x, double eps):
    cdef Py_ssize_t rows = x.shape[0], n = x.shape[1]
    y_arr = np.empty((rows, n), dtype=np.float64)
    rstd_arr = np.empty(rows, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] y = y_arr
    cdef cnp.float64_t[::1] rstd = rstd_arr
    cdef Py_ssize_t i, j
    cdef double mean, var, d, r
    for i in range(rows):
        mean = 0.0
        for j in range(n):
            mean += x[i, j]
        mean /= n
        var = 0.0
        for j in range(n):
            d = x[i, j] - mean
            var += d * d
        var /= n
        r = 1.0 / sqrt(var + eps)
        rstd[i] = r
        for j in range(n):
            y[i, j] = (x[i, j] - mean) * r
    return y_arr, rstd_arr


def layernorm_bwd(cnp.float64_t[:, ::1] y, cnp.float64_t[::1] rstd,
                  cnp.float64_t[:, ::1] grad):
    cdef Py_ssize_t rows = y.shape[0], n = y.shape[1]
    out_arr = np.empty((rows, n), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] gx = out_arr
    cdef Py_ssize_t i, j
    cdef double gm, gym
    for i in range(rows):
        gm = 0.0
        gym = 0.0
        for j in range(n):
            gm += grad[i, j]
            gym += grad[i, j] * y[i, j]
        gm /= n
        gym /= n
        for j in range(n):
            gx[i, j] = rstd[i] * (grad[i, j] - gm - y[i, j] * gym)
    return out_arr


def scatter_add_rows(cnp.float64_t[:, ::1] table, cnp.int64_t[::1] idx,
                     cnp.float64_t[:, ::1] rows):
    cdef Py_ssize_t m = idx.shape[0], n = table.shape[1]
    cdef Py_ssize_t i, j, r
    for i in range(m):
        r = idx[i]
        for j in range(n):
            table[r, j] += rows[i, j]
    return None
