# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: dense per-window DCTs and blockwise inverse transforms.

Mirrors the contracts of freqlens._kernels_py; selected at import by
freqlens.dct when available.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sliding_dct(const double[:, ::1] plane, const double[:, ::1] basis,
                Py_ssize_t window, Py_ssize_t stride):
    """Orthonormal DCT-II of every window of `plane` at the given stride.

    Returns an array of shape (rows, cols, window, window) where block
    (i, j) is the transform of the window anchored at (i*stride, j*stride).
    """
    cdef Py_ssize_t H = plane.shape[0]
    cdef Py_ssize_t W = plane.shape[1]
    cdef Py_ssize_t w = window
    cdef Py_ssize_t rows = (H - w) // stride + 1
    cdef Py_ssize_t cols = (W - w) // stride + 1
    out_arr = np.empty((rows, cols, w, w), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    tmp_arr = np.empty((w, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef Py_ssize_t r, c, i, j, k, y0, x0
    cdef double acc
    for r in range(rows):
        y0 = r * stride
        for c in range(cols):
            x0 = c * stride
            # tmp = basis @ window
            for i in range(w):
                for j in range(w):
                    acc = 0.0
                    for k in range(w):
                        acc += basis[i, k] * plane[y0 + k, x0 + j]
                    tmp[i, j] = acc
            # out[r, c] = tmp @ basis.T
            for i in range(w):
                for j in range(w):
                    acc = 0.0
                    for k in range(w):
                        acc += tmp[i, k] * basis[j, k]
                    out[r, c, i, j] = acc
    return out_arr


def block_idct(const double[:, :, :, ::1] blocks, const double[:, ::1] basis):
    """Inverse transform of non-overlapping block spectra, reassembled.

    Valid only for stride == window layouts (JPEG-style tiling); the output
    plane has shape (rows*window, cols*window).
    """
    cdef Py_ssize_t rows = blocks.shape[0]
    cdef Py_ssize_t cols = blocks.shape[1]
    cdef Py_ssize_t w = blocks.shape[2]
    out_arr = np.empty((rows * w, cols * w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    tmp_arr = np.empty((w, w), dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef Py_ssize_t r, c, i, j, k
    cdef double acc
    for r in range(rows):
        for c in range(cols):
            # tmp = basis.T @ block
            for i in range(w):
                for j in range(w):
                    acc = 0.0
                    for k in range(w):
                        acc += basis[k, i] * blocks[r, c, k, j]
                    tmp[i, j] = acc
            # out tile = tmp @ basis
            for i in range(w):
                for j in range(w):
                    acc = 0.0
                    for k in range(w):
                        acc += tmp[i, k] * basis[k, j]
                    out[r * w + i, c * w + j] = acc
    return out_arr
