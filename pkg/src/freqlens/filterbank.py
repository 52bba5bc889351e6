"""Band masks over the DCT spectrum plus squashed learnable residual filters.

Coefficient (u, v) of an S x S spectrum is ordered by its normalized
antidiagonal index d = (u + v) / (2 * (S - 1)), the 1-D axis along which a
2-D spectrum is conventionally flattened from low to high frequency. Masks
are built with integer arithmetic so band-edge ties land deterministically
in the lower band.
"""

from dataclasses import dataclass, field

import numpy as np

#: Normalized antidiagonal cut points of the 3-band decomposition masks.
DECOMP_CUTS = (1.0 / 16.0, 1.0 / 8.0)


def sigma(x):
    """Squashing map (1 - exp(-x)) / (1 + exp(-x)); equals tanh(x/2).

    Odd, monotone, saturates in (-1, 1).
    """
    return np.tanh(0.5 * np.asarray(x, dtype=np.float64))


def sigma_grad(x):
    """Derivative of sigma: (1 - sigma(x)^2) / 2. Positive everywhere."""
    s = sigma(x)
    return 0.5 * (1.0 - s * s)


@dataclass(frozen=True)
class BandPartition:
    """Disjoint binary masks tiling an S x S spectrum from low to high band."""

    size: int
    masks: np.ndarray  # (n_bands, S, S), {0.0, 1.0}, disjoint, sums to ones
    thresholds: tuple  # upper normalized-antidiagonal cut of each band

    @property
    def n_bands(self) -> int:
        return self.masks.shape[0]


def _antidiag_sums(size: int) -> np.ndarray:
    u = np.arange(size)
    return u[:, None] + u[None, :]  # integer u+v grid


def make_fad_bands(size: int) -> BandPartition:
    """Three-band partition: d <= 1/16, 1/16 < d <= 1/8, d > 1/8.

    Integer form of d = (u+v) / (2(S-1)) <= 1/16 is 16*(u+v) <= 2*(S-1).
    """
    if size < 2:
        raise ValueError("spectrum side must be >= 2")
    uv = _antidiag_sums(size)
    span = 2 * (size - 1)
    low = 16 * uv <= span
    mid = (16 * uv > span) & (8 * uv <= span)
    high = 8 * uv > span
    masks = np.stack([low, mid, high]).astype(np.float64)
    return BandPartition(size=size, masks=masks, thresholds=(*DECOMP_CUTS, 1.0))


def make_lfs_bands(size: int, m_bands: int) -> BandPartition:
    """Equal partition of the antidiagonal axis into m_bands intervals.

    Band i covers d in ((i-1)/M, i/M]; band 1 also takes d = 0. More bands
    than antidiagonals (m_bands > 2(S-1)+1) is rejected.
    """
    if size < 2:
        raise ValueError("spectrum side must be >= 2")
    if m_bands < 1:
        raise ValueError("band count must be >= 1")
    span = 2 * (size - 1)
    if m_bands > span + 1:
        raise ValueError(
            f"{m_bands} bands exceed the {span + 1} antidiagonals of a "
            f"{size}x{size} spectrum"
        )
    uv = _antidiag_sums(size)
    masks = []
    for i in range(1, m_bands + 1):
        lower = m_bands * uv > (i - 1) * span  # d > (i-1)/M
        if i == 1:
            lower |= uv == 0
        upper = m_bands * uv <= i * span  # d <= i/M
        masks.append(lower & upper)
    masks = np.stack(masks).astype(np.float64)
    return BandPartition(
        size=size,
        masks=masks,
        thresholds=tuple(i / m_bands for i in range(1, m_bands + 1)),
    )


@dataclass
class LearnableFilter:
    """Raw residual parameters added to a base mask through sigma."""

    raw: np.ndarray
    trainable: bool = True


def effective_filter(base, raw) -> np.ndarray:
    """Element-wise base + sigma(raw); stays inside (base - 1, base + 1)."""
    b = np.asarray(base, dtype=np.float64)
    r = np.asarray(raw, dtype=np.float64)
    if b.shape != r.shape:
        raise ValueError(f"filter shape mismatch: base {b.shape} vs raw {r.shape}")
    return b + sigma(r)


@dataclass
class FilterBank:
    """A band partition paired with one learnable residual filter per band."""

    partition: BandPartition
    raw: np.ndarray = field(default=None)  # (n_bands, S, S)

    def __post_init__(self):
        n, s = self.partition.n_bands, self.partition.size
        if self.raw is None:
            self.raw = np.zeros((n, s, s), dtype=np.float64)
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.shape != (n, s, s):
            raise ValueError(
                f"raw filters shape {self.raw.shape} does not match "
                f"partition ({n}, {s}, {s})"
            )

    @classmethod
    def decomposition(cls, size: int, raw=None) -> "FilterBank":
        return cls(make_fad_bands(size), raw)

    @classmethod
    def statistics(cls, size: int, m_bands: int, raw=None) -> "FilterBank":
        return cls(make_lfs_bands(size, m_bands), raw)

    @property
    def size(self) -> int:
        return self.partition.size

    @property
    def n_bands(self) -> int:
        return self.partition.n_bands

    def effective(self) -> np.ndarray:
        """Per-band effective filters, (n_bands, S, S)."""
        return self.partition.masks + sigma(self.raw)
