# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference versions."""

import numpy as np
from libc.math cimport erfc, exp, sqrt, INFINITY

cdef double _SQRT2 = sqrt(2.0)
cdef double _INV_SQRT2PI = 1.0 / sqrt(2.0 * 3.141592653589793)


def serve_boundary(double[::1] arrivals, double[::1] sizes, double start, double rate):
    cdef Py_ssize_t n = arrivals.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double t = start
    cdef double inv = 1.0 / rate
    cdef Py_ssize_t k
    for k in range(n):
        if arrivals[k] > t:
            t = arrivals[k]
        t += sizes[k] * inv
        o[k] = t
    return out


cdef inline double _psi(double u, double mu, double sigma) nogil:
    cdef double z, cdf, pdf
    if u == -INFINITY:
        return 0.0
    if sigma <= 0.0:
        return u - mu if u > mu else 0.0
    z = (u - mu) / sigma
    cdf = 0.5 * erfc(-z / _SQRT2)
    pdf = _INV_SQRT2PI * exp(-0.5 * z * z)
    return (u - mu) * cdf + sigma * pdf


def ehvi_2d(double[::1] mu1, double[::1] sigma1, double[::1] mu2, double[::1] sigma2,
            double[::1] front1, double[::1] front2, double r1, double r2):
    cdef Py_ssize_t n = front1.shape[0]
    cdef Py_ssize_t m = mu1.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    bounds_arr = np.empty(n + 2, dtype=np.float64)
    uppers_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] bounds = bounds_arr
    cdef double[::1] uppers = uppers_arr
    cdef Py_ssize_t c, j
    cdef double acc, prev, nxt, width
    bounds[0] = -INFINITY
    for j in range(n):
        bounds[j + 1] = front1[j]
        uppers[j + 1] = front2[j]
    bounds[n + 1] = r1
    uppers[0] = r2
    with nogil:
        for c in range(m):
            acc = 0.0
            prev = 0.0
            for j in range(n + 1):
                nxt = _psi(bounds[j + 1], mu1[c], sigma1[c])
                width = nxt - prev
                prev = nxt
                if width <= 0.0:
                    continue
                acc += width * _psi(uppers[j], mu2[c], sigma2[c])
            o[c] = acc if acc > 0.0 else 0.0
    return out


def hypervolume_2d(f1, f2, double r1, double r2):
    pts = sorted((a, b) for a, b in zip(f1, f2) if a < r1 and b < r2)
    cdef double area = 0.0
    cdef double best2 = r2
    cdef double a, b
    for a, b in pts:
        if b < best2:
            area += (r1 - a) * (best2 - b)
            best2 = b
    return area
