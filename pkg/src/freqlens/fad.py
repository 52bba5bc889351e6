"""Band-filtered image decomposition with exact reverse-mode gradients.

Each component is the inverse DCT of the image spectrum multiplied by one
effective band filter (binary mask plus squashed learnable residual). With
zero residuals the masks tile the spectrum, so the components sum back to
the input exactly. The math runs batched; the single-image entry points
delegate to the batch path.
"""

import numpy as np

from .dct import dct_basis
from .filterbank import FilterBank, sigma_grad
from .image import as_image


def _check_batch(images, bank: FilterBank) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"expected (B, H, W, C) images, got shape {x.shape}")
    _, h, w, c = x.shape
    if h != w:
        raise ValueError(f"decomposition requires square images, got {h}x{w}")
    if h != bank.size:
        raise ValueError(f"filter bank size {bank.size} does not match image side {h}")
    if c not in (1, 3):
        raise ValueError(f"expected 1 or 3 channels, got {c}")
    return x


def fad_forward_batch(images, bank: FilterBank) -> np.ndarray:
    """(B, H, W, C) images -> (B, n_bands, H, W, C) components."""
    x = _check_batch(images, bank)
    basis = dct_basis(bank.size)
    spectra = basis @ x.transpose(0, 3, 1, 2) @ basis.T  # (B, C, S, S)
    eff = bank.effective()  # (N, S, S)
    filtered = eff[None, :, None] * spectra[:, None]  # (B, N, C, S, S)
    comps = basis.T @ filtered @ basis
    return comps.transpose(0, 1, 3, 4, 2)  # (B, N, H, W, C)


def fad_backward_batch(upstream, images, bank: FilterBank):
    """Gradients through fad_forward_batch.

    upstream: (B, n_bands, H, W, C). Returns (d_images (B, H, W, C),
    d_raw (n_bands, S, S)), d_raw summed over the batch. The transforms are
    orthonormal, hence self-adjoint up to transposition, which gives
    d_image = sum_i idct2(dct2(upstream_i) * effective_i).
    """
    x = _check_batch(images, bank)
    up = np.asarray(upstream, dtype=np.float64)
    n = bank.n_bands
    if up.shape != (x.shape[0], n) + x.shape[1:]:
        raise ValueError(
            f"upstream shape {up.shape} does not match {(x.shape[0], n) + x.shape[1:]}"
        )
    basis = dct_basis(bank.size)
    eff = bank.effective()
    spectra = basis @ x.transpose(0, 3, 1, 2) @ basis.T  # (B, C, S, S)
    g_spec = basis @ up.transpose(0, 1, 4, 2, 3) @ basis.T  # (B, N, C, S, S)
    d_spec = (g_spec * eff[None, :, None]).sum(axis=1)  # (B, C, S, S)
    d_images = (basis.T @ d_spec @ basis).transpose(0, 2, 3, 1)
    d_eff = (g_spec * spectra[:, None]).sum(axis=(0, 2))  # (N, S, S)
    d_raw = sigma_grad(bank.raw) * d_eff
    return d_images, d_raw


def fad_forward(image, bank: FilterBank) -> np.ndarray:
    """Decompose one image into per-band spatial components (n_bands, H, W, C).

    Component i is idct2(dct2(x) * effective_i), applied independently per
    channel with one shared filter bank.
    """
    return fad_forward_batch(as_image(image)[None], bank)[0]


def fad_backward(upstream, image, bank: FilterBank):
    """Per-image gradients: (d_image (H, W, C), d_raw (n_bands, S, S))."""
    img = as_image(image)
    up = np.asarray(upstream, dtype=np.float64)
    if up.shape != (bank.n_bands,) + img.shape:
        raise ValueError(
            f"upstream shape {up.shape} does not match {(bank.n_bands,) + img.shape}"
        )
    d_images, d_raw = fad_backward_batch(up[None], img[None], bank)
    return d_images[0], d_raw


def stack_components(components) -> np.ndarray:
    """(N, H, W, C) components -> (N*C, H, W) feature map, band-major order."""
    n, h, w, c = components.shape
    return components.transpose(0, 3, 1, 2).reshape(n * c, h, w)


def unstack_components(stacked, channels: int) -> np.ndarray:
    """Inverse of stack_components for gradient routing."""
    nc, h, w = stacked.shape
    n = nc // channels
    return stacked.reshape(n, channels, h, w).transpose(0, 2, 3, 1)
