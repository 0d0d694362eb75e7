# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures and results mirror ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()


def ar1(double x0, double coef, double innov_scale, const double[::1] normals):
    cdef Py_ssize_t n = normals.shape[0]
    cdef Py_ssize_t k
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] x = out
    x[0] = x0
    for k in range(n):
        x[k + 1] = coef * x[k] + innov_scale * normals[k]
    return out


def bridge_crossings(const double[::1] values, double level, double speed,
                     const double[:, ::1] normals, int levels):
    cdef Py_ssize_t n = values.shape[0] - 1
    cdef Py_ssize_t npts = (1 << levels) + 1
    cdef Py_ssize_t j, lv, k, step, half, idx
    cdef double h, sd, a, b
    cdef double[::1] buf = np.empty(npts, dtype=np.float64)
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] hit = out
    for j in range(n):
        a = values[j] - level
        b = values[j + 1] - level
        if a * b <= 0.0:
            hit[j] = 1
            continue
        buf[0] = values[j]
        buf[npts - 1] = values[j + 1]
        step = npts - 1
        h = 1.0
        idx = 0
        for lv in range(levels):
            half = step // 2
            sd = sqrt(speed * h / 4.0)
            k = half
            while k < npts:
                buf[k] = 0.5 * (buf[k - half] + buf[k + half]) + sd * normals[j, idx]
                idx += 1
                k += step
            step = half
            h = h / 2.0
        for k in range(npts - 1):
            if (buf[k] - level) * (buf[k + 1] - level) <= 0.0:
                hit[j] = 1
                break
    return out


def curvilinear_sum(const double[:, ::1] increments, double x0, double dx,
                    const double[:, ::1] positions):
    cdef Py_ssize_t p = positions.shape[0]
    cdef Py_ssize_t m = positions.shape[1]
    cdef Py_ssize_t n = increments.shape[1]
    cdef Py_ssize_t k, j, i
    cdef double u, w, acc
    out = np.empty(p, dtype=np.float64)
    cdef double[::1] res = out
    for k in range(p):
        acc = 0.0
        for j in range(m):
            u = (positions[k, j] - x0) / dx
            i = <Py_ssize_t>floor(u)
            if i < 0:
                i = 0
            elif i > n - 2:
                i = n - 2
            w = u - i
            acc += (1.0 - w) * increments[j, i] + w * increments[j, i + 1]
        res[k] = acc
    return out
