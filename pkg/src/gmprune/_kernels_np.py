"""Numpy fallback for the hot kernels.

These functions mirror gmprune._kernels_cy exactly. The distance kernels
accumulate strictly left to right (np.cumsum is a sequential scan), so the
two backends produce bit-identical distance matrices and row sums, and a sum
that includes an exactly-zero self term equals the sum that skips it.

Convolution kernels use im2col windows + einsum; they agree with the compiled
loops only to floating-point tolerance, not bitwise.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KIND_L2 = 0
KIND_L1 = 1
KIND_COSINE = 2


def _seq_sum(a: np.ndarray) -> np.ndarray:
    """Strict left-to-right sum along the last axis."""
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1], dtype=np.float64)
    return np.cumsum(a, axis=-1)[..., -1]


def pairwise_distance(m: np.ndarray, kind: int):
    """All-pairs distance matrix of the rows of `m`.

    Returns (D, first_zero_row). The diagonal is exactly 0.0. For cosine,
    rows with zero norm get distance 2.0 to every other row and
    first_zero_row reports the smallest such row index (-1 if none);
    callers decide whether that is an error.
    """
    m = np.ascontiguousarray(m, dtype=np.float64)
    n = m.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    first_zero = -1

    if kind == KIND_COSINE:
        norms = np.sqrt(_seq_sum(m * m))
        zero = norms == 0.0
        if zero.any():
            first_zero = int(np.argmax(zero))
        for j in range(n):
            dots = _seq_sum(m * m[j])
            if zero[j]:
                row = np.full(n, 2.0)
            else:
                den = norms * norms[j]
                row = 1.0 - dots / np.where(zero, 1.0, den)
                np.clip(row, 0.0, 2.0, out=row)
                row[zero] = 2.0
            out[j] = row
        np.fill_diagonal(out, 0.0)
        return out, first_zero

    for j in range(n):
        diff = m - m[j]
        if kind == KIND_L2:
            out[j] = np.sqrt(_seq_sum(diff * diff))
        elif kind == KIND_L1:
            out[j] = _seq_sum(np.abs(diff))
        else:
            raise ValueError(f"unknown distance kind code {kind}")
    np.fill_diagonal(out, 0.0)
    return out, first_zero


def row_sums(d: np.ndarray, exclude_diag: bool) -> np.ndarray:
    """Per-row sums of a square matrix, accumulated left to right.

    With exclude_diag the j-th element of row j is skipped; the remaining
    elements keep their order.
    """
    d = np.ascontiguousarray(d, dtype=np.float64)
    n = d.shape[0]
    if not exclude_diag:
        return _seq_sum(d)
    if n == 1:
        return np.zeros(1, dtype=np.float64)
    off = d[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return _seq_sum(off)


def conv2d_forward(x: np.ndarray, w: np.ndarray, pad: int) -> np.ndarray:
    """Stride-1 2-D convolution (cross-correlation) with zero padding."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    k = w.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (B,C,Ho,Wo,k,k)
    return np.einsum("bchwij,ocij->bohw", win, w)


def conv2d_backward(x: np.ndarray, w: np.ndarray, gy: np.ndarray, pad: int):
    """Gradients of conv2d_forward w.r.t. input and weights.

    Returns (gx, gw) for stride-1 convolution with the given padding.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    gy = np.ascontiguousarray(gy, dtype=np.float64)
    k = w.shape[2]

    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    gw = np.einsum("bohw,bchwij->ocij", gy, win)

    # input gradient = full correlation of gy with the flipped kernel
    wf = w[:, :, ::-1, ::-1]
    gp = k - 1 - pad
    gyp = np.pad(gy, ((0, 0), (0, 0), (gp, gp), (gp, gp)))
    gwin = sliding_window_view(gyp, (k, k), axis=(2, 3))
    gx = np.einsum("bohwij,ocij->bchw", gwin, wf)
    return gx, gw
