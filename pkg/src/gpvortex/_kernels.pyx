# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, floor, M_PI

cnp.import_array()


def eval_at_qp(const cnp.int64_t[:, ::1] tris, const double[:, ::1] bary, const double[::1] vals):
    cdef Py_ssize_t nt = tris.shape[0], nq = bary.shape[0], t, q
    out_arr = np.empty((nt, nq))
    cdef double[:, ::1] out = out_arr
    cdef double v0, v1, v2
    for t in range(nt):
        v0 = vals[tris[t, 0]]
        v1 = vals[tris[t, 1]]
        v2 = vals[tris[t, 2]]
        for q in range(nq):
            out[t, q] = bary[q, 0] * v0 + bary[q, 1] * v1 + bary[q, 2] * v2
    return out_arr


def scatter_load(const cnp.int64_t[:, ::1] tris, const double[:, ::1] bary, const double[:, ::1] coef, Py_ssize_t n):
    cdef Py_ssize_t nt = tris.shape[0], nq = bary.shape[0], t, q, k
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double s
    for t in range(nt):
        for k in range(3):
            s = 0.0
            for q in range(nq):
                s += coef[t, q] * bary[q, k]
            out[tris[t, k]] += s
    return out_arr


def weighted_mass_local(const cnp.int64_t[:, ::1] tris, const double[:, ::1] bary, const double[:, ::1] coef):
    cdef Py_ssize_t nt = tris.shape[0], nq = bary.shape[0], t, q, a, b
    out_arr = np.zeros((nt, 3, 3))
    cdef double[:, :, ::1] out = out_arr
    cdef double c, s
    for t in range(nt):
        for q in range(nq):
            c = coef[t, q]
            for a in range(3):
                s = c * bary[q, a]
                for b in range(a, 3):
                    out[t, a, b] += s * bary[q, b]
        for a in range(3):
            for b in range(a):
                out[t, a, b] = out[t, b, a]
    return out_arr


def triangle_winding(const cnp.int64_t[:, ::1] tris, const double[::1] re, const double[::1] im):
    cdef Py_ssize_t nt = tris.shape[0], nv = re.shape[0], t, k, i
    out_arr = np.zeros(nt)
    ang_arr = np.empty(nv)
    cdef double[::1] out = out_arr
    cdef double[::1] ang = ang_arr
    cdef double s, d
    for i in range(nv):
        ang[i] = atan2(im[i], re[i])
    for t in range(nt):
        s = 0.0
        for k in range(3):
            d = ang[tris[t, (k + 1) % 3]] - ang[tris[t, k]]
            # wrap to [-pi, pi)
            s += d - 2.0 * M_PI * floor((d + M_PI) / (2.0 * M_PI))
        out[t] = s / (2.0 * M_PI)
    return out_arr
