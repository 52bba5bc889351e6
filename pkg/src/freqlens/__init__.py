"""freqlens: frequency-domain forgery-clue toolkit.

Band-filtered image decomposition, sliding-window local frequency
statistics, cross-attention stream fusion, a desk-scale trainable detector,
synthetic forgery corpora with compression tiers, and evaluation metrics.
"""

from .dct import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
