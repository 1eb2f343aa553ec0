# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled split-search kernels: the hot inner loops of forest training.

Mirrors the API of ``_split_py`` (see that module for the contract).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log

BACKEND = "cython"


def best_logrank_split(
    double[:] x,
    double[:] thresholds,
    long[:] lo,
    long[:] hi,
    long[:] death_k,
    double[:] d_tot,
    double[:] n_tot,
    long min_child,
):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t K = d_tot.shape[0]
    cdef Py_ssize_t m = thresholds.shape[0]
    cdef cnp.ndarray[long, ndim=1] order_arr = np.argsort(np.asarray(x), kind="stable").astype(np.int64)
    cdef long[:] order = order_arr
    cdef cnp.ndarray[long, ndim=1] diff_arr = np.zeros(K + 1, dtype=np.int64)
    cdef long[:] diff = diff_arr
    cdef cnp.ndarray[long, ndim=1] d1_arr = np.zeros(K, dtype=np.int64)
    cdef long[:] d1 = d1_arr
    cdef Py_ssize_t ptr = 0, j, k
    cdef long i, n_left = 0, running
    cdef double thr, observed, expected, variance, frac, stat
    cdef long best_idx = -1
    cdef double best_stat = 0.0

    for j in range(m):
        thr = thresholds[j]
        while ptr < n and x[order[ptr]] <= thr:
            i = order[ptr]
            diff[lo[i]] += 1
            diff[hi[i] + 1] -= 1
            if death_k[i] >= 0:
                d1[death_k[i]] += 1
            n_left += 1
            ptr += 1
        if n_left < min_child or n - n_left < min_child:
            continue
        observed = 0.0
        expected = 0.0
        variance = 0.0
        running = 0
        for k in range(K):
            running += diff[k]
            observed += d1[k]
            if n_tot[k] > 0.0:
                frac = running / n_tot[k]
                expected += d_tot[k] * frac
                if n_tot[k] > 1.0:
                    variance += d_tot[k] * frac * (1.0 - frac) * (n_tot[k] - d_tot[k]) / (n_tot[k] - 1.0)
        if variance <= 0.0:
            continue
        stat = (observed - expected) * (observed - expected) / variance
        if stat > best_stat:
            best_stat = stat
            best_idx = j
    return int(best_idx), float(best_stat)


def best_poisson_split(
    double[:] x,
    double[:] thresholds,
    double[:] delta,
    double[:] expected_events,
    long min_child,
):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = thresholds.shape[0]
    cdef cnp.ndarray[long, ndim=1] order_arr = np.argsort(np.asarray(x), kind="stable").astype(np.int64)
    cdef long[:] order = order_arr
    cdef double d_total = 0.0, e_total = 0.0
    cdef Py_ssize_t ptr = 0, j
    cdef long i, n_left = 0
    cdef double thr, d_left = 0.0, e_left = 0.0, d_right, e_right, gain
    cdef long best_idx = -1
    cdef double best_gain = 0.0

    for j in range(n):
        d_total += delta[j]
        e_total += expected_events[j]
    for j in range(m):
        thr = thresholds[j]
        while ptr < n and x[order[ptr]] <= thr:
            i = order[ptr]
            d_left += delta[i]
            e_left += expected_events[i]
            n_left += 1
            ptr += 1
        d_right = d_total - d_left
        e_right = e_total - e_left
        if n_left < min_child or n - n_left < min_child:
            continue
        if d_left <= 0.0 or d_right <= 0.0 or e_left <= 0.0 or e_right <= 0.0:
            continue
        gain = d_left * log(d_left / e_left) + d_right * log(d_right / e_right)
        if gain > best_gain:
            best_gain = gain
            best_idx = j
    return int(best_idx), float(best_gain)
