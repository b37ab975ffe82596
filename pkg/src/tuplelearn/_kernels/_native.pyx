# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for ranking-pmf scoring and triplet log-loss.

Same contracts as the pure-NumPy module ``tuplelearn._kernels.fallback``.
"""

import numpy as np

from libc.math cimport log


def ranking_weights(const double[::1] dists, double mu, const long[:, ::1] perms):
    cdef Py_ssize_t n_body = dists.shape[0]
    cdef Py_ssize_t n_perms = perms.shape[0]
    cdef Py_ssize_t p, i
    cdef double w
    d2_arr = np.empty(n_body, dtype=np.float64)
    out_arr = np.empty(n_perms, dtype=np.float64)
    cdef double[::1] d2 = d2_arr
    cdef double[::1] out = out_arr
    for i in range(n_body):
        d2[i] = dists[i] * dists[i]
    for p in range(n_perms):
        w = 1.0
        for i in range(n_body - 1):
            w *= (d2[perms[p, i + 1]] + mu) / (
                d2[perms[p, i]] + d2[perms[p, i + 1]] + 2.0 * mu
            )
        out[p] = w
    return out_arr


def mi_from_samples(const double[:, ::1] samples, double mu, const long[:, ::1] perms):
    cdef Py_ssize_t n_samples = samples.shape[0]
    cdef Py_ssize_t n_body = samples.shape[1]
    cdef Py_ssize_t n_perms = perms.shape[0]
    cdef Py_ssize_t s, p, i
    cdef double w, z, h, q, avg_entropy, h_of_mean
    d2_arr = np.empty(n_body, dtype=np.float64)
    weights_arr = np.empty(n_perms, dtype=np.float64)
    mean_pmf_arr = np.zeros(n_perms, dtype=np.float64)
    cdef double[::1] d2 = d2_arr
    cdef double[::1] weights = weights_arr
    cdef double[::1] mean_pmf = mean_pmf_arr

    avg_entropy = 0.0
    for s in range(n_samples):
        for i in range(n_body):
            d2[i] = samples[s, i] * samples[s, i]
        z = 0.0
        for p in range(n_perms):
            w = 1.0
            for i in range(n_body - 1):
                w *= (d2[perms[p, i + 1]] + mu) / (
                    d2[perms[p, i]] + d2[perms[p, i + 1]] + 2.0 * mu
                )
            weights[p] = w
            z += w
        h = 0.0
        for p in range(n_perms):
            q = weights[p] / z
            mean_pmf[p] += q
            h -= q * log(q)
        avg_entropy += h
    avg_entropy /= n_samples

    h_of_mean = 0.0
    for p in range(n_perms):
        q = mean_pmf[p] / n_samples
        h_of_mean -= q * log(q)
    return h_of_mean - avg_entropy


def loss_and_grad(const double[:, ::1] k, const long[:, ::1] triplets, double mu, bint want_grad=True):
    cdef Py_ssize_t n = k.shape[0]
    cdef Py_ssize_t n_trip = triplets.shape[0]
    cdef Py_ssize_t t
    cdef long a, c, f
    cdef double d2c, d2f, den, num, loss, gc, gf
    grad_arr = np.zeros((n, n), dtype=np.float64) if want_grad else None
    cdef double[:, ::1] grad
    if want_grad:
        grad = grad_arr

    loss = 0.0
    for t in range(n_trip):
        a = triplets[t, 0]
        c = triplets[t, 1]
        f = triplets[t, 2]
        d2c = k[a, a] + k[c, c] - k[a, c] - k[c, a]
        d2f = k[a, a] + k[f, f] - k[a, f] - k[f, a]
        den = d2c + d2f + 2.0 * mu
        num = d2f + mu
        loss += log(den) - log(num)
        if want_grad:
            gc = 1.0 / den
            gf = 1.0 / den - 1.0 / num
            grad[a, a] += gc + gf
            grad[c, c] += gc
            grad[f, f] += gf
            grad[a, c] -= gc
            grad[c, a] -= gc
            grad[a, f] -= gf
            grad[f, a] -= gf
    return loss, grad_arr
