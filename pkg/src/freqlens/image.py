"""Image ingestion, resizing and a JPEG-style compressor for quality tiers.

Images are float64 arrays of shape (H, W, C) with C in {1, 3} and samples in
[0, 1]. Pixel/float conversion is v/255 on load and round(v*255) clamped to
[0, 255] on save. The compressor reproduces JPEG's quantization artifact
(8x8 blockwise DCT against the scaled standard luminance table) without
chroma subsampling or entropy coding, which keeps it bit-deterministic.
"""

import numpy as np
from PIL import Image as _PILImage

from .dct import blockwise_dct, blockwise_idct

#: Standard JPEG luminance quantization table (quality 50 base).
QUANT_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

#: Quality tier tags and their JPEG-style qualities (RAW is uncompressed).
TIER_QUALITY = {"RAW": None, "HQ": 75, "LQ": 30}

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(arr) -> np.ndarray:
    """Validate and return an (H, W, C) float64 image with C in {1, 3}."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W, C) with C in {{1, 3}}, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG file to float64 samples in [0, 1].

    Grayscale files yield C=1; everything else is converted to RGB.
    """
    with _PILImage.open(path) as im:
        if im.format not in ("PNG", "JPEG"):
            raise ValueError(f"unsupported image format {im.format!r} for {path}")
        if im.mode == "L":
            data = np.asarray(im, dtype=np.float64)[:, :, None]
        else:
            data = np.asarray(im.convert("RGB"), dtype=np.float64)
    return data / 255.0


def save_image(path, img) -> None:
    """Write an image as PNG, quantizing samples via round(v*255)."""
    img = as_image(img)
    u8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    if u8.shape[2] == 1:
        _PILImage.fromarray(u8[:, :, 0], mode="L").save(path, format="PNG")
    else:
        _PILImage.fromarray(u8, mode="RGB").save(path, format="PNG")


def luminance(img) -> np.ndarray:
    """(H, W) luminance plane: 0.299 R + 0.587 G + 0.114 B (identity for C=1)."""
    img = as_image(img)
    if img.shape[2] == 1:
        return img[:, :, 0]
    return img @ LUMA_WEIGHTS


def resize_bilinear(img, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner-aligned sampling; output stays in [0, 1]."""
    img = as_image(img)
    if out_h < 1 or out_w < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w, _ = img.shape
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    # v0 + (v1 - v0) * f keeps constants exact
    top = img[np.ix_(y0, x0)]
    top = top + (img[np.ix_(y0, x1)] - top) * fx
    bot = img[np.ix_(y1, x0)]
    bot = bot + (img[np.ix_(y1, x1)] - bot) * fx
    return top + (bot - top) * fy


def quantization_table(quality: int) -> np.ndarray:
    """Standard table scaled for a quality in [1, 100], entries clamped [1, 255]."""
    q = int(quality)
    if q < 1 or q > 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    scale = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
    table = np.floor((QUANT_LUMA * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def compress_jpeg_like(img, quality: int) -> np.ndarray:
    """JPEG-style quantization round trip at the given quality.

    Per channel: pad to a multiple of 8 by edge replication, 8x8 blockwise
    orthonormal DCT, quantize against the scaled luminance table, inverse
    transform, crop, clamp to [0, 1]. The 8x8 orthonormal DCT of 0..255-scale
    pixels coincides with JPEG's (1/4)C(u)C(v) convention, so the table maps
    to [0, 1] units as table/255.
    """
    img = as_image(img)
    table = quantization_table(quality)
    step = table / 255.0  # quantizer step in orthonormal [0,1] units
    h, w, c = img.shape
    pad_h = (-h) % 8
    pad_w = (-w) % 8
    out = np.empty_like(img)
    for ch in range(c):
        plane = np.pad(img[:, :, ch], ((0, pad_h), (0, pad_w)), mode="edge")
        blocks = blockwise_dct(plane, 8)
        blocks = np.round(blocks / step) * step
        out[:, :, ch] = blockwise_idct(blocks)[:h, :w]
    return np.clip(out, 0.0, 1.0)


def apply_tier(img, tier: str) -> np.ndarray:
    """Compress an image according to a quality tier tag (RAW/HQ/LQ)."""
    if tier not in TIER_QUALITY:
        raise ValueError(f"unknown tier {tier!r}; expected one of {sorted(TIER_QUALITY)}")
    quality = TIER_QUALITY[tier]
    if quality is None:
        return as_image(img).copy()
    return compress_jpeg_like(img, quality)
