# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element-matrix kernels; same contract as ``_kernels_py``."""
import numpy as np

cimport numpy as cnp


cdef inline void _jac(const double[:, ::1] x, const cnp.int64_t[:, ::1] tri, Py_ssize_t m,
                      double* it00, double* it01, double* it10, double* it11, double* det) noexcept nogil:
    cdef cnp.int64_t a = tri[m, 0], b = tri[m, 1], c = tri[m, 2]
    cdef double j00 = x[b, 0] - x[a, 0], j01 = x[c, 0] - x[a, 0]
    cdef double j10 = x[b, 1] - x[a, 1], j11 = x[c, 1] - x[a, 1]
    cdef double d = j00 * j11 - j01 * j10
    det[0] = d
    it00[0] = j11 / d
    it01[0] = -j10 / d
    it10[0] = -j01 / d
    it11[0] = j00 / d


def p2_stiffness(const double[:, ::1] x, const cnp.int64_t[:, ::1] tri,
                 const double[::1] qw, const double[:, :, ::1] dphi2):
    cdef Py_ssize_t M = tri.shape[0], nq = qw.shape[0], m, q, i, j
    cdef double it00, it01, it10, it11, det, w
    cdef double gx[6]
    cdef double gy[6]
    out_arr = np.zeros((M, 6, 6))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for m in range(M):
            _jac(x, tri, m, &it00, &it01, &it10, &it11, &det)
            for q in range(nq):
                w = qw[q] * det
                for i in range(6):
                    gx[i] = it00 * dphi2[q, i, 0] + it01 * dphi2[q, i, 1]
                    gy[i] = it10 * dphi2[q, i, 0] + it11 * dphi2[q, i, 1]
                for i in range(6):
                    for j in range(6):
                        out[m, i, j] += w * (gx[i] * gx[j] + gy[i] * gy[j])
    return out_arr


def p2p1_divergence(const double[:, ::1] x, const cnp.int64_t[:, ::1] tri,
                    const double[::1] qw, const double[:, :, ::1] dphi2,
                    const double[:, ::1] phi1):
    cdef Py_ssize_t M = tri.shape[0], nq = qw.shape[0], m, q, i, k
    cdef double it00, it01, it10, it11, det, w, gx, gy
    out_arr = np.zeros((M, 3, 12))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for m in range(M):
            _jac(x, tri, m, &it00, &it01, &it10, &it11, &det)
            for q in range(nq):
                w = qw[q] * det
                for i in range(6):
                    gx = it00 * dphi2[q, i, 0] + it01 * dphi2[q, i, 1]
                    gy = it10 * dphi2[q, i, 0] + it11 * dphi2[q, i, 1]
                    for k in range(3):
                        out[m, k, 2 * i] += w * phi1[q, k] * gx
                        out[m, k, 2 * i + 1] += w * phi1[q, k] * gy
    return out_arr


def p1_mass(const double[:, ::1] x, const cnp.int64_t[:, ::1] tri):
    cdef Py_ssize_t M = tri.shape[0], m, i, j
    cdef double it00, it01, it10, it11, det
    out_arr = np.empty((M, 3, 3))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for m in range(M):
            _jac(x, tri, m, &it00, &it01, &it10, &it11, &det)
            for i in range(3):
                for j in range(3):
                    out[m, i, j] = det / (12.0 if i == j else 24.0)
    return out_arr


def p1_stiffness(const double[:, ::1] x, const cnp.int64_t[:, ::1] tri):
    cdef Py_ssize_t M = tri.shape[0], m, i, j
    cdef double it00, it01, it10, it11, det
    cdef double rx[3]
    cdef double ry[3]
    cdef double gx[3]
    cdef double gy[3]
    rx[0] = -1.0; ry[0] = -1.0
    rx[1] = 1.0; ry[1] = 0.0
    rx[2] = 0.0; ry[2] = 1.0
    out_arr = np.empty((M, 3, 3))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for m in range(M):
            _jac(x, tri, m, &it00, &it01, &it10, &it11, &det)
            for i in range(3):
                gx[i] = it00 * rx[i] + it01 * ry[i]
                gy[i] = it10 * rx[i] + it11 * ry[i]
            for i in range(3):
                for j in range(3):
                    out[m, i, j] = 0.5 * det * (gx[i] * gx[j] + gy[i] * gy[j])
    return out_arr
