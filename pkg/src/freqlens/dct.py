"""Orthonormal 2D DCT-II machinery: full-plane, blockwise and sliding-window.

Low-frequency coefficients sit in the top-left corner of every spectrum.
Orthonormal scaling is used throughout, so Parseval holds to rounding error
and idct2 is the exact inverse of dct2. The windowed paths are served by a
compiled extension when it is built; a pure NumPy fallback is selected at
import otherwise. Set FREQLENS_BACKEND=compiled or =python to force one.

A deliberately naive quadruple-sum evaluation (dct2_naive) is kept as the
reference oracle for tests and benchmark cross-checks.
"""

import os
from functools import lru_cache

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

_forced = os.environ.get("FREQLENS_BACKEND", "")
if _forced not in ("", "compiled", "python"):
    raise ValueError(
        f"FREQLENS_BACKEND must be 'compiled' or 'python', got {_forced!r}"
    )
if _forced == "compiled" and _kernels_c is None:
    raise ImportError("FREQLENS_BACKEND=compiled but the extension is not built")

_impl = _kernels_py if (_forced == "python" or _kernels_c is None) else _kernels_c

#: Name of the kernel backend selected at import time.
BACKEND = "python" if _impl is _kernels_py else "compiled"


def backends():
    """Mapping of available kernel backends, compiled first when present."""
    out = {}
    if _kernels_c is not None:
        out["compiled"] = _kernels_c
    out["python"] = _kernels_py
    return out


@lru_cache(maxsize=64)
def dct_basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix of size n; row k is basis vector k.

    B[k, m] = a(k) * cos(pi * (2m+1) * k / (2n)), a(0)=sqrt(1/n), else sqrt(2/n).
    The returned array is cached and marked read-only.
    """
    if n < 1:
        raise ValueError("basis size must be >= 1")
    k = np.arange(n, dtype=np.float64)[:, None]
    m = np.arange(n, dtype=np.float64)[None, :]
    b = np.sqrt(2.0 / n) * np.cos(np.pi * (2.0 * m + 1.0) * k / (2.0 * n))
    b[0, :] = np.sqrt(1.0 / n)
    b.setflags(write=False)
    return b


def _as_plane(plane) -> np.ndarray:
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D plane, got shape {p.shape}")
    return p


def dct2(plane) -> np.ndarray:
    """Orthonormal 2-D DCT-II of a plane (separable fast path)."""
    p = _as_plane(plane)
    bh = dct_basis(p.shape[0])
    bw = dct_basis(p.shape[1])
    return bh @ p @ bw.T


def idct2(spec) -> np.ndarray:
    """Exact inverse of dct2 (orthonormal, so the transpose pair)."""
    s = _as_plane(spec)
    bh = dct_basis(s.shape[0])
    bw = dct_basis(s.shape[1])
    return bh.T @ s @ bw


def dct2_naive(plane) -> np.ndarray:
    """Quadruple-sum reference DCT-II, independent of the separable path.

    O(H^2 * W^2); oracle only.
    """
    p = _as_plane(plane)
    h, w = p.shape
    out = np.empty((h, w), dtype=np.float64)
    mm = np.arange(h, dtype=np.float64)
    nn = np.arange(w, dtype=np.float64)
    for u in range(h):
        au = np.sqrt(1.0 / h) if u == 0 else np.sqrt(2.0 / h)
        cu = np.cos(np.pi * (2.0 * mm + 1.0) * u / (2.0 * h))
        for v in range(w):
            av = np.sqrt(1.0 / w) if v == 0 else np.sqrt(2.0 / w)
            cv = np.cos(np.pi * (2.0 * nn + 1.0) * v / (2.0 * w))
            out[u, v] = au * av * np.sum(p * np.outer(cu, cv))
    return out


def sliding_grid(size_h: int, size_w: int, window: int, stride: int):
    """(rows, cols) of the valid (no padding) window grid."""
    if window < 1 or window > min(size_h, size_w):
        raise ValueError(
            f"window {window} does not fit a {size_h}x{size_w} plane"
        )
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return (size_h - window) // stride + 1, (size_w - window) // stride + 1


def sliding_dct(plane, window: int, stride: int) -> np.ndarray:
    """DCT-II of every w x w window at the given stride, no padding.

    Returns (rows, cols, window, window); block (i, j) is dct2 of the patch
    anchored at (i*stride, j*stride).
    """
    p = _as_plane(plane)
    sliding_grid(p.shape[0], p.shape[1], window, stride)
    basis = dct_basis(window)
    return _impl.sliding_dct(np.ascontiguousarray(p), basis, window, stride)


def blockwise_dct(plane, block: int = 8) -> np.ndarray:
    """Non-overlapping blockwise DCT; plane dims must be multiples of block."""
    p = _as_plane(plane)
    if p.shape[0] % block or p.shape[1] % block:
        raise ValueError(f"plane shape {p.shape} is not a multiple of {block}")
    return _impl.sliding_dct(np.ascontiguousarray(p), dct_basis(block), block, block)


def blockwise_idct(blocks) -> np.ndarray:
    """Reassemble a plane from non-overlapping block spectra."""
    b = np.ascontiguousarray(blocks, dtype=np.float64)
    if b.ndim != 4 or b.shape[2] != b.shape[3]:
        raise ValueError(f"expected (rows, cols, w, w) blocks, got {b.shape}")
    return _impl.block_idct(b, dct_basis(b.shape[2]))
