# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled p-value sweep.

Mirrors :mod:`isoturn._fallback`; both take observations already arranged in
the neighbour ordering and return, per centre, the neighbour count and the
minimum log term.
"""
import numpy as np

from libc.math cimport log, log1p, exp, fabs, lgamma, INFINITY, NAN
from libc.stdint cimport uint8_t, uint32_t, int64_t

cdef double EPS = 1e-15
cdef double TINY = 1e-300
cdef int MAX_ITER = 200000


cdef double _cf(double z, double a, double b) noexcept nogil:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * z / qap
    cdef double h, aa, step
    cdef int m, m2
    if fabs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if fabs(step - 1.0) < EPS:
            return h
    return NAN


cdef inline double _log_lower_direct(double z, double a, double b) noexcept nogil:
    return a * log(z) + b * log1p(-z) - log(a) + log(_cf(z, a, b))


cdef double _log_incbeta(double z, double a, double b) noexcept nogil:
    cdef double lb, upper
    if z <= 0.0:
        return -INFINITY
    if z >= 1.0:
        return lgamma(a) + lgamma(b) - lgamma(a + b)
    if z < (a + 1.0) / (a + b + 2.0):
        return _log_lower_direct(z, a, b)
    lb = lgamma(a) + lgamma(b) - lgamma(a + b)
    upper = _log_lower_direct(1.0 - z, b, a)
    return lb + log1p(-exp(upper - lb))


def log_incomplete_beta(double z, double a, double b):
    return _log_incbeta(z, a, b)


cdef double _log_term(int64_t k, int64_t s, double tau, double log_tau,
                      double log_1mtau) noexcept nogil:
    cdef double a = <double>(k - s + 1)
    cdef double b = <double>(s + 1)
    return s * log_tau + a * log_1mtau - _log_incbeta(1.0 - tau, a, b)


def log_terms(const int64_t[::1] k, const int64_t[::1] s, double tau):
    cdef Py_ssize_t i, n = k.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double lt = log(tau), l1 = log1p(-tau)
    with nogil:
        for i in range(n):
            o[i] = _log_term(k[i], s[i], tau, lt, l1)
    return out


def sweep(const uint32_t[::1] profiles, const uint8_t[::1] outcomes,
          const uint32_t[::1] centers, double tau):
    """For each centre, walk the (pre-ordered) observations dominated by it.

    Returns ``(n, min_log_term)``; centres with no neighbours get
    ``min_log_term = 0`` (p = 1).
    """
    cdef Py_ssize_t n_obs = profiles.shape[0]
    cdef Py_ssize_t n_ctr = centers.shape[0]
    counts = np.zeros(n_ctr, dtype=np.int64)
    best = np.zeros(n_ctr, dtype=np.float64)
    cdef int64_t[::1] cnt = counts
    cdef double[::1] bst = best
    cdef double lt = log(tau), l1 = log1p(-tau)
    cdef Py_ssize_t c, j
    cdef uint32_t centre, outside
    cdef int64_t k, s
    cdef double cur, term
    with nogil:
        for c in range(n_ctr):
            centre = centers[c]
            outside = ~centre
            k = 0
            s = 0
            cur = INFINITY
            for j in range(n_obs):
                if profiles[j] & outside:
                    continue
                k += 1
                s += outcomes[j]
                term = _log_term(k, s, tau, lt, l1)
                if term != term:
                    cur = NAN
                    break
                if term < cur:
                    cur = term
            cnt[c] = k
            bst[c] = cur if k > 0 else 0.0
    return counts, best
