# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled allocation inner-loop kernels; twin of _kernels_py.py."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF COINCIDENT_DIST = 1e-9


def nearest_assignment(double[:, ::1] points, double[:, ::1] sites):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t n = sites.shape[0]
    if n == 0:
        raise ValueError("need at least one site")
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] a = out
    cdef Py_ssize_t i, j, best
    cdef double dx, dy, d2, best_d2
    for i in range(m):
        best = 0
        best_d2 = 0.0
        for j in range(n):
            dx = points[i, 0] - sites[j, 0]
            dy = points[i, 1] - sites[j, 1]
            d2 = dx * dx + dy * dy
            if j == 0 or d2 < best_d2:
                best = j
                best_d2 = d2
        a[i] = best
    return out


def assigned_energy(double[:, ::1] points, double[::1] weights,
                    double[:, ::1] sites, long long[::1] assign):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t i
    cdef long long j
    cdef double dx, dy, total = 0.0
    for i in range(m):
        j = assign[i]
        dx = points[i, 0] - sites[j, 0]
        dy = points[i, 1] - sites[j, 1]
        total += weights[i] * (dx * dx + dy * dy)
    return total


def attraction_controls(double[:, ::1] sites, double[:, ::1] points,
                        double[::1] weights, long long[::1] assign, double alpha):
    cdef Py_ssize_t n = sites.shape[0]
    cdef Py_ssize_t m = points.shape[0]
    out = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] u = out
    cdef Py_ssize_t i
    cdef long long j
    for i in range(m):
        j = assign[i]
        u[j, 0] += weights[i] * (sites[j, 0] - points[i, 0])
        u[j, 1] += weights[i] * (sites[j, 1] - points[i, 1])
    for i in range(n):
        u[i, 0] *= -2.0 * alpha
        u[i, 1] *= -2.0 * alpha
    return out


def barrier_controls(double[:, ::1] positions, double beta, double r_safe):
    cdef Py_ssize_t n = positions.shape[0]
    out = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] u = out
    cdef Py_ssize_t j, l
    cdef double dx, dy, d2, scale
    cdef double r2 = r_safe * r_safe
    cdef double c2 = COINCIDENT_DIST * COINCIDENT_DIST
    cdef int degeneracies = 0
    for j in range(n):
        for l in range(n):
            if l == j:
                continue
            dx = positions[j, 0] - positions[l, 0]
            dy = positions[j, 1] - positions[l, 1]
            d2 = dx * dx + dy * dy
            if d2 < c2:
                u[j, 0] += 1.0 if j > l else -1.0
                if j > l:
                    degeneracies += 1
            elif d2 < r2:
                scale = beta / d2
                u[j, 0] += scale * dx
                u[j, 1] += scale * dy
    return out, degeneracies
