# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""
import numpy as np
from libc.math cimport sqrt


def laplacian(const double[:, :, ::1] values, bint odd, double hx, double hy, int dim):
    cdef Py_ssize_t m = values.shape[0], nx = values.shape[1], ny = values.shape[2]
    out_arr = np.empty((m, nx, ny))
    cdef double[:, :, ::1] out = out_arr
    cdef double sign = -1.0 if odd else 1.0
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef Py_ssize_t a, i, j
    cdef double c, left, right, down, up, acc
    for a in range(m):
        for i in range(nx):
            for j in range(ny):
                c = values[a, i, j]
                left = values[a, i - 1, j] if i > 0 else sign * c
                right = values[a, i + 1, j] if i < nx - 1 else sign * c
                acc = (right - 2.0 * c + left) * ihx2
                if dim == 2:
                    down = values[a, i, j - 1] if j > 0 else sign * c
                    up = values[a, i, j + 1] if j < ny - 1 else sign * c
                    acc = acc + (up - 2.0 * c + down) * ihy2
                out[a, i, j] = acc
    return out_arr


def mean_oscillation(const double[:, :, ::1] values, const long[:, ::1] offsets, int min_cells):
    cdef Py_ssize_t m = values.shape[0], nx = values.shape[1], ny = values.shape[2]
    cdef Py_ssize_t K = offsets.shape[0]
    cdef Py_ssize_t a, i, j, q, x, y
    cdef int count
    cdef double best = -1.0, dev, d, t, osc
    cdef Py_ssize_t bi = -1, bj = -1
    avg_arr = np.zeros(m)
    cdef double[::1] avg = avg_arr
    for i in range(nx):
        for j in range(ny):
            count = 0
            for a in range(m):
                avg[a] = 0.0
            for q in range(K):
                x = i + offsets[q, 0]
                y = j + offsets[q, 1]
                if x < 0 or x >= nx or y < 0 or y >= ny:
                    continue
                count += 1
                for a in range(m):
                    avg[a] += values[a, x, y]
            if count < min_cells:
                continue
            for a in range(m):
                avg[a] /= count
            dev = 0.0
            for q in range(K):
                x = i + offsets[q, 0]
                y = j + offsets[q, 1]
                if x < 0 or x >= nx or y < 0 or y >= ny:
                    continue
                d = 0.0
                for a in range(m):
                    t = values[a, x, y] - avg[a]
                    d += t * t
                dev += sqrt(d)
            osc = dev / count
            if osc > best:
                best = osc
                bi = i
                bj = j
    if bi < 0:
        return 0.0, -1, -1
    return best, bi, bj
