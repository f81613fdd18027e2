# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numeric hot kernels.

Same contracts as vidagg._core.fallback; plain loops over C-contiguous
float64 arrays, no large temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, M_PI

cnp.import_array()


def sqdist_matrix(a, b):
    """Pairwise squared Euclidean distances, shape (len(a), len(b))."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], d = av.shape[1]
    if bv.shape[1] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef double acc, diff
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for t in range(d):
                diff = av[i, t] - bv[j, t]
                acc += diff * diff
            ov[i, j] = acc
    return out


def chi2_distance_matrix(a, b, double eps):
    """Pairwise chi-square distances sum_j (a-b)^2 / (a+b+eps)."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], d = av.shape[1]
    if bv.shape[1] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef double acc, diff, denom
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for t in range(d):
                diff = av[i, t] - bv[j, t]
                denom = av[i, t] + bv[j, t] + eps
                acc += diff * diff / denom
            ov[i, j] = acc
    return out


def gmm_log_joint(x, means, variances, log_weights):
    """log(w_c) + log N(x_i; mu_c, diag sigma_c^2), shape (n, k)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64)
    cdef double[:, ::1] vv = np.ascontiguousarray(variances, dtype=np.float64)
    cdef double[::1] lw = np.ascontiguousarray(log_weights, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], k = mv.shape[0], p = xv.shape[1]
    if mv.shape[1] != p or vv.shape[0] != k or vv.shape[1] != p or lw.shape[0] != k:
        raise ValueError("dimension mismatch")
    log_norm_arr = np.empty(k, dtype=np.float64)
    inv_var_arr = np.empty((k, p), dtype=np.float64)
    cdef double[::1] log_norm = log_norm_arr
    cdef double[:, ::1] inv_var = inv_var_arr
    cdef Py_ssize_t i, c, t
    cdef double acc, diff
    cdef double half_log_2pi = 0.5 * log(2.0 * M_PI)
    for c in range(k):
        acc = 0.0
        for t in range(p):
            acc += log(vv[c, t])
            inv_var[c, t] = 1.0 / vv[c, t]
        log_norm[c] = lw[c] - p * half_log_2pi - 0.5 * acc
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] ov = out
    for i in range(n):
        for c in range(k):
            acc = 0.0
            for t in range(p):
                diff = xv[i, t] - mv[c, t]
                acc += diff * diff * inv_var[c, t]
            ov[i, c] = log_norm[c] - 0.5 * acc
    return out


def fv_sums(x, gamma, means, stds):
    """Unnormalized Fisher statistics; see vidagg._core.fallback.fv_sums."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(means, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(stds, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], k = mv.shape[0], p = xv.shape[1]
    if gv.shape[0] != n or gv.shape[1] != k or mv.shape[1] != p or sv.shape[0] != k or sv.shape[1] != p:
        raise ValueError("dimension mismatch")
    s_mu = np.zeros((k, p), dtype=np.float64)
    s_sig = np.zeros((k, p), dtype=np.float64)
    cdef double[:, ::1] smv = s_mu
    cdef double[:, ::1] ssv = s_sig
    cdef Py_ssize_t i, c, t
    cdef double z, g
    for i in range(n):
        for c in range(k):
            g = gv[i, c]
            for t in range(p):
                z = (xv[i, t] - mv[c, t]) / sv[c, t]
                smv[c, t] += g * z
                ssv[c, t] += g * (z * z - 1.0)
    return s_mu, s_sig
