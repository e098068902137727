# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: pairwise filter distances and stride-1 convolutions.

Must stay in lockstep with gmprune._kernels_np. Distance kernels accumulate
strictly left to right so both backends are bit-identical; the convolution
kernels use straight loops and agree with the numpy im2col path only to
floating-point tolerance.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

KIND_L2 = 0
KIND_L1 = 1
KIND_COSINE = 2


def pairwise_distance(m, int kind):
    """All-pairs distance matrix of the rows of `m`.

    Returns (D, first_zero_row). The diagonal is exactly 0.0. For cosine,
    rows with zero norm get distance 2.0 to every other row and
    first_zero_row reports the smallest such row index (-1 if none).
    """
    cdef double[:, ::1] a = np.ascontiguousarray(m, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t d = a.shape[1]
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] norms
    cdef Py_ssize_t i, j, k
    cdef double s, diff, val
    cdef int first_zero = -1

    if kind == KIND_COSINE:
        norms_arr = np.empty(n, dtype=np.float64)
        norms = norms_arr
        for i in range(n):
            s = 0.0
            for k in range(d):
                s += a[i, k] * a[i, k]
            norms[i] = sqrt(s)
            if norms[i] == 0.0 and first_zero < 0:
                first_zero = <int> i
        for i in range(n):
            for j in range(i + 1, n):
                if norms[i] == 0.0 or norms[j] == 0.0:
                    val = 2.0
                else:
                    s = 0.0
                    for k in range(d):
                        s += a[i, k] * a[j, k]
                    val = 1.0 - s / (norms[i] * norms[j])
                    if val < 0.0:
                        val = 0.0
                    elif val > 2.0:
                        val = 2.0
                out[i, j] = val
                out[j, i] = val
        return out_arr, first_zero

    if kind != KIND_L2 and kind != KIND_L1:
        raise ValueError(f"unknown distance kind code {kind}")

    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            if kind == KIND_L2:
                for k in range(d):
                    diff = a[i, k] - a[j, k]
                    s += diff * diff
                val = sqrt(s)
            else:
                for k in range(d):
                    s += fabs(a[i, k] - a[j, k])
                val = s
            out[i, j] = val
            out[j, i] = val
    return out_arr, first_zero


def row_sums(dmat, bint exclude_diag):
    """Per-row sums of a square matrix, accumulated left to right.

    With exclude_diag the j-th element of row j is skipped; the remaining
    elements keep their order.
    """
    cdef double[:, ::1] a = np.ascontiguousarray(dmat, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t ncol = a.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(n):
        s = 0.0
        for j in range(ncol):
            if exclude_diag and j == i:
                continue
            s += a[i, j]
        out[i] = s
    return out_arr


def conv2d_forward(x, w, int pad):
    """Stride-1 2-D convolution (cross-correlation) with zero padding."""
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3]
    cdef Py_ssize_t O = wv.shape[0], K = wv.shape[2]
    cdef Py_ssize_t Ho = H + 2 * pad - K + 1
    cdef Py_ssize_t Wo = W + 2 * pad - K + 1
    y_arr = np.zeros((B, O, Ho, Wo), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t b, o, c, oy, ox, i, j, iy, ix
    cdef double acc
    for b in range(B):
        for o in range(O):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = 0.0
                    for c in range(C):
                        for i in range(K):
                            iy = oy + i - pad
                            if iy < 0 or iy >= H:
                                continue
                            for j in range(K):
                                ix = ox + j - pad
                                if ix < 0 or ix >= W:
                                    continue
                                acc += xv[b, c, iy, ix] * wv[o, c, i, j]
                    y[b, o, oy, ox] = acc
    return y_arr


def conv2d_backward(x, w, gy, int pad):
    """Gradients of conv2d_forward w.r.t. input and weights.

    Returns (gx, gw) for stride-1 convolution with the given padding.
    """
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(gy, dtype=np.float64)
    cdef Py_ssize_t B = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3]
    cdef Py_ssize_t O = wv.shape[0], K = wv.shape[2]
    cdef Py_ssize_t Ho = gv.shape[2], Wo = gv.shape[3]
    gx_arr = np.zeros((B, C, H, W), dtype=np.float64)
    gw_arr = np.zeros((O, C, K, K), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, o, c, oy, ox, i, j, iy, ix
    cdef double g
    for b in range(B):
        for o in range(O):
            for oy in range(Ho):
                for ox in range(Wo):
                    g = gv[b, o, oy, ox]
                    if g == 0.0:
                        continue
                    for c in range(C):
                        for i in range(K):
                            iy = oy + i - pad
                            if iy < 0 or iy >= H:
                                continue
                            for j in range(K):
                                ix = ox + j - pad
                                if ix < 0 or ix >= W:
                                    continue
                                gw[o, c, i, j] += g * xv[b, c, iy, ix]
                                gx[b, c, iy, ix] += g * wv[o, c, i, j]
    return gx_arr, gw_arr
