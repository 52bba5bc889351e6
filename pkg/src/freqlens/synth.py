"""Deterministic synthetic forgery corpus with compression-quality tiers.

Real images are multi-octave value-noise textures over a low-frequency
gradient. Fakes carry one local manipulation inside a feathered elliptical
region of about a quarter of the area: a Gaussian blur splice, a down/up
resampling pass, or an injected pixel-period checkerboard. Every pair is
rendered at the requested quality tiers and listed in a manifest CSV.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .config import DataError, derive_seed
from .image import apply_tier, resize_bilinear, save_image

MANIPULATIONS = ("blur_splice", "resample", "checkerboard")
MANIFEST_FIELDS = ("path", "label", "manipulation", "tier", "pair_id")

BLUR_SIGMA = 1.5
CHECKER_AMPLITUDE = 0.02
FEATHER_PIXELS = 3.0
REGION_AREA_FRACTION = 0.25


@dataclass(frozen=True)
class CorpusSpec:
    n_pairs: int
    side: int = 64
    manipulations: tuple = MANIPULATIONS
    tiers: tuple = ("RAW", "HQ", "LQ")
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "manipulations", tuple(self.manipulations))
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if not self.manipulations or not self.tiers:
            raise ValueError("at least one manipulation and one tier required")
        unknown = set(self.manipulations) - set(MANIPULATIONS)
        if unknown:
            raise ValueError(f"unknown manipulations: {sorted(unknown)}")


@dataclass(frozen=True)
class Sample:
    path: str
    label: str  # "real" or "fake"
    manipulation: str
    tier: str
    pair_id: int


def gen_real(seed: int, side: int) -> np.ndarray:
    """Procedural RGB texture, deterministic in seed, normalized to [0, 1]."""
    if side < 32:
        raise ValueError("side must be >= 32")
    rng = np.random.default_rng(seed)
    # octaves down to pixel scale; the finest keeps the spectrum broadband
    grids = [5, 9, 17, 33, side // 2 + 1, side]
    amps = [1.0, 0.6, 0.36, 0.22, 0.13, 0.08]
    base = np.zeros((side, side, 1))
    tint = np.zeros((side, side, 3))
    for g, a in zip(grids, amps):
        base += a * resize_bilinear(rng.uniform(-1.0, 1.0, (g, g, 1)), side, side)
        tint += 0.35 * a * resize_bilinear(rng.uniform(-1.0, 1.0, (g, g, 3)), side, side)
    gy, gx = rng.uniform(-1.0, 1.0, 2)
    axis = np.linspace(-0.5, 0.5, side)
    ramp = (gy * axis[:, None] + gx * axis[None, :])[:, :, None]
    img = base + tint + 0.8 * ramp
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo) if hi > lo else np.full_like(img, 0.5)


def region_alpha(side: int, seed: int) -> np.ndarray:
    """Feathered elliptical mask covering ~25% of the area, center jittered."""
    rng = np.random.default_rng(seed)
    cy = side / 2.0 + rng.uniform(-side / 8.0, side / 8.0)
    cx = side / 2.0 + rng.uniform(-side / 8.0, side / 8.0)
    semi = side * np.sqrt(REGION_AREA_FRACTION / np.pi)
    yy = (np.arange(side) - cy) / semi
    xx = (np.arange(side) - cx) / semi
    r = np.sqrt(yy[:, None] ** 2 + xx[None, :] ** 2)
    # feather ramps alpha from 1 inside to 0 over ~FEATHER_PIXELS
    return np.clip((1.0 - r) * semi / FEATHER_PIXELS, 0.0, 1.0)


def gen_fake(real, manipulation: str, seed: int) -> np.ndarray:
    """Apply one local manipulation to a real image; deterministic in seed."""
    if manipulation not in MANIPULATIONS:
        raise ValueError(f"unknown manipulation {manipulation!r}")
    real = np.asarray(real, dtype=np.float64)
    side = real.shape[0]
    alpha = region_alpha(side, derive_seed(seed, "region"))[:, :, None]
    if manipulation == "blur_splice":
        blurred = gaussian_filter(real, sigma=(BLUR_SIGMA, BLUR_SIGMA, 0.0), mode="nearest")
        out = real + alpha * (blurred - real)
    elif manipulation == "resample":
        down = resize_bilinear(real, side // 2, side // 2)
        up = resize_bilinear(down, side, side)
        out = real + alpha * (up - real)
    else:  # checkerboard
        rng = np.random.default_rng(derive_seed(seed, "phase"))
        py, px = rng.integers(0, 2, 2)
        yy = np.arange(side) + py
        xx = np.arange(side) + px
        pattern = CHECKER_AMPLITUDE * ((-1.0) ** (yy[:, None] + xx[None, :]))
        out = real + alpha * pattern[:, :, None]
    return np.clip(out, 0.0, 1.0)


def build_corpus(spec: CorpusSpec, out_dir) -> list:
    """Write `<tier>/<real|fake>/<pair>.png` plus manifest.csv; returns samples."""
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
        for tier in spec.tiers:
            for label in ("real", "fake"):
                (root / tier / label).mkdir(parents=True, exist_ok=True)
    except OSError:
        raise
    samples = []
    for pair in range(spec.n_pairs):
        manipulation = spec.manipulations[pair % len(spec.manipulations)]
        real = gen_real(derive_seed(spec.seed, f"real:{pair}"), spec.side)
        fake = gen_fake(real, manipulation, derive_seed(spec.seed, f"fake:{pair}"))
        for tier in spec.tiers:
            for label, img in (("real", real), ("fake", fake)):
                rel = f"{tier}/{label}/{pair:05d}.png"
                save_image(root / rel, apply_tier(img, tier))
                samples.append(Sample(rel, label, manipulation, tier, pair))
    write_manifest(root / "manifest.csv", samples)
    return samples


def write_manifest(path, samples) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_FIELDS)
        for s in samples:
            writer.writerow([s.path, s.label, s.manipulation, s.tier, s.pair_id])


def read_manifest(path) -> list:
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(MANIFEST_FIELDS):
            raise DataError(f"manifest header {reader.fieldnames} != {list(MANIFEST_FIELDS)}")
        for row in reader:
            if row["label"] not in ("real", "fake"):
                raise DataError(f"bad label {row['label']!r} in manifest")
            samples.append(Sample(row["path"], row["label"], row["manipulation"],
                                  row["tier"], int(row["pair_id"])))
    return samples
