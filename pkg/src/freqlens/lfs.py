"""Local frequency statistics: log10 band energies of sliding-window spectra.

Every w x w window of the luminance plane is transformed, each band filter
is applied, and the L1 magnitude is floored at eps then logged. Statistics
reassemble into a (rows, cols, m_bands) map with rows = (H - w) // s + 1
(valid windows, no padding).
"""

import math

import numpy as np

from .dct import sliding_dct, sliding_grid
from .filterbank import FilterBank, sigma_grad
from .image import as_image, luminance

LN10 = math.log(10.0)


def _check_args(image, bank: FilterBank, window: int, stride: int, eps: float):
    img = as_image(image)
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if bank.size != window:
        raise ValueError(f"filter bank size {bank.size} does not match window {window}")
    sliding_grid(img.shape[0], img.shape[1], window, stride)
    return img


def lfs_forward(image, bank: FilterBank, window: int = 10, stride: int = 2,
                eps: float = 1e-12, with_cache: bool = False):
    """Per-window, per-band log statistics of an image.

    Returns (rows, cols, m_bands) with entries
    log10(max(eps, sum_uv |D(p)[u,v] * effective_i[u,v]|)), bands ordered low
    to high. Multi-channel input is reduced to luminance first. When
    with_cache is set, also returns intermediates for lfs_backward.
    """
    img = _check_args(image, bank, window, stride, eps)
    plane = luminance(img)
    rows, cols = sliding_grid(plane.shape[0], plane.shape[1], window, stride)
    spectra = sliding_dct(plane, window, stride)
    abs_p = np.abs(spectra).reshape(rows * cols, window * window)
    eff = bank.effective()
    # |P . F| = |P| . |F| elementwise, so band sums are one matmul
    sums = abs_p @ np.abs(eff).reshape(bank.n_bands, -1).T  # (rows*cols, M)
    q = np.log10(np.maximum(sums, eps)).reshape(rows, cols, bank.n_bands)
    if with_cache:
        return q, {"abs_p": abs_p, "sums": sums, "eff": eff,
                   "grid": (rows, cols), "eps": eps}
    return q


def lfs_backward(upstream, image, bank: FilterBank, window: int = 10,
                 stride: int = 2, eps: float = 1e-12, cache=None) -> np.ndarray:
    """Gradient of a scalar loss through lfs_forward w.r.t. the raw filters.

    Floored entries (band sum below eps) contribute zero. For the rest,
    d q_i / d h[u,v] = |P[u,v]| * sign(effective_i[u,v]) * sigma'(h[u,v])
                       / (ln(10) * band_sum_i),
    with sign(0) = 0.
    """
    if cache is None:
        _, cache = lfs_forward(image, bank, window, stride, eps, with_cache=True)
    rows, cols = cache["grid"]
    m = bank.n_bands
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (rows, cols, m):
        raise ValueError(f"upstream shape {up.shape} does not match {(rows, cols, m)}")
    sums = cache["sums"]
    live = sums >= cache["eps"]
    coef = np.where(live, up.reshape(rows * cols, m) / (np.maximum(sums, cache["eps"]) * LN10), 0.0)
    d_absf = coef.T @ cache["abs_p"]  # (M, w*w)
    d_eff = d_absf.reshape(m, window, window) * np.sign(cache["eff"])
    return sigma_grad(bank.raw) * d_eff
