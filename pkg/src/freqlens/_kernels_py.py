"""Pure NumPy fallback for the windowed DCT kernels.

Used when the compiled extension is unavailable or when
FREQLENS_BACKEND=python forces it. Same contracts as freqlens._kernels.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def sliding_dct(plane, basis, window, stride):
    """Orthonormal DCT-II of every window of `plane` at the given stride."""
    wins = sliding_window_view(plane, (window, window))[::stride, ::stride]
    return np.ascontiguousarray(basis @ wins @ basis.T)


def block_idct(blocks, basis):
    """Inverse transform of non-overlapping block spectra, reassembled."""
    rows, cols, w, _ = blocks.shape
    tiles = basis.T @ blocks @ basis
    return np.ascontiguousarray(tiles.transpose(0, 2, 1, 3).reshape(rows * w, cols * w))
