# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


def bank_log_softmax_mix(double[:, ::1] logw, double[::1] radii,
                         double[:, ::1] z, double[:, :, ::1] logsm_out):
    cdef Py_ssize_t M = logw.shape[0]
    cdef Py_ssize_t G = logw.shape[1]
    cdef Py_ssize_t K = z.shape[1]
    cdef Py_ssize_t m, g, k
    cdef double r, s, smax, lse, w
    probs_arr = np.zeros((M, K), dtype=np.float64)
    cdef double[:, ::1] probs = probs_arr
    for m in range(M):
        r = radii[m]
        for g in range(G):
            smax = -INFINITY
            for k in range(K):
                s = r * z[g, k]
                if s > smax:
                    smax = s
            lse = 0.0
            for k in range(K):
                lse += exp(r * z[g, k] - smax)
            lse = smax + log(lse)
            w = exp(logw[m, g])
            for k in range(K):
                s = r * z[g, k] - lse
                logsm_out[m, g, k] = s
                probs[m, k] += w * exp(s)
    return probs_arr


def bank_update(double[:, ::1] logw, double[:, :, ::1] logsm, Py_ssize_t y):
    cdef Py_ssize_t M = logw.shape[0]
    cdef Py_ssize_t G = logw.shape[1]
    cdef Py_ssize_t m, g
    cdef double vmax, acc, lse
    norm_arr = np.empty(M, dtype=np.float64)
    cdef double[::1] norm = norm_arr
    for m in range(M):
        vmax = -INFINITY
        for g in range(G):
            logw[m, g] += logsm[m, g, y]
            if logw[m, g] > vmax:
                vmax = logw[m, g]
        acc = 0.0
        for g in range(G):
            acc += exp(logw[m, g] - vmax)
        lse = vmax + log(acc)
        norm[m] = lse
        for g in range(G):
            logw[m, g] -= lse
    return norm_arr


def spectral_ridge_predict(double[::1] mu, double[::1] ycoef,
                           double[::1] kcoef, double[::1] lambdas):
    cdef Py_ssize_t n = mu.shape[0]
    cdef Py_ssize_t L = lambdas.shape[0]
    cdef Py_ssize_t i, l
    cdef double acc, lam
    out_arr = np.empty(L, dtype=np.float64)
    cdef double[::1] out = out_arr
    for l in range(L):
        lam = lambdas[l]
        acc = 0.0
        for i in range(n):
            acc += ycoef[i] * kcoef[i] / (lam + mu[i])
        out[l] = acc
    return out_arr
