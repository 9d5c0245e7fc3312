# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: one-ring lag tables and the linear assignment solver.

Semantics match ``cdnoma._kernels_py`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, M_PI, INFINITY

cnp.import_array()


def onering_lags_2d(sin_nodes, weights, Py_ssize_t n_lags):
    cdef double[::1] s = np.ascontiguousarray(sin_nodes, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], d, a
    out = np.empty(n_lags, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double re, im, ph
    for d in range(n_lags):
        re = 0.0
        im = 0.0
        for a in range(n):
            ph = M_PI * d * s[a]
            re += w[a] * cos(ph)
            im += w[a] * sin(ph)
        o[d] = re + 1j * im
    return out


def onering_lags_3d(sin_theta, cos_theta, w_theta, sin_phi, w_phi, Py_ssize_t side):
    cdef double[::1] st = np.ascontiguousarray(sin_theta, dtype=np.float64)
    cdef double[::1] ct = np.ascontiguousarray(cos_theta, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w_theta, dtype=np.float64)
    cdef double[::1] sp = np.ascontiguousarray(sin_phi, dtype=np.float64)
    cdef double[::1] wp = np.ascontiguousarray(w_phi, dtype=np.float64)
    cdef Py_ssize_t nb = st.shape[0], na = sp.shape[0]
    cdef Py_ssize_t n_lags = 2 * side - 1
    cdef Py_ssize_t b, a, r, c
    cdef double hre, him, ph, vre, vim, dr, dc
    hor = np.empty((nb, n_lags), dtype=np.complex128)
    cdef double complex[:, ::1] h = hor
    for b in range(nb):
        for c in range(n_lags):
            dc = <double>(c - (side - 1))
            hre = 0.0
            him = 0.0
            for a in range(na):
                ph = M_PI * dc * ct[b] * sp[a]
                hre += wp[a] * cos(ph)
                him += wp[a] * sin(ph)
            h[b, c] = hre + 1j * him
    out = np.zeros((n_lags, n_lags), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double complex vb
    for r in range(n_lags):
        dr = <double>(r - (side - 1))
        for b in range(nb):
            ph = M_PI * dr * st[b]
            vb = wt[b] * (cos(ph) + 1j * sin(ph))
            for c in range(n_lags):
                o[r, c] = o[r, c] + vb * h[b, c]
    return out


def linear_assignment(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1]
    if n > m:
        raise ValueError("cost matrix must have at least as many columns as rows")
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(m + 1)
    cdef double[::1] minv = np.empty(m + 1)
    cdef Py_ssize_t[::1] p = np.zeros(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(m + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(m + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    for j in range(1, m + 1):
        if p[j]:
            o[p[j] - 1] = j - 1
    return out
