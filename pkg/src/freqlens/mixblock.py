"""Cross-attention fusion between two feature streams.

A single row-stochastic attention matrix is computed from projected queries
(stream a) and keys (stream b); each stream then receives the other stream's
projected values through a zero-initialized residual gate, so the block is
exactly the identity at initialization.

Feature maps are (C, H, W); attention runs over the L = H*W positions. The
math is implemented batched over (B, C, H, W); the single-map entry points
delegate to it.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class MixBlockParams:
    """Projections and residual gates of one fusion block."""

    wq: np.ndarray  # (C', C) query projection, applied to stream a
    wk: np.ndarray  # (C', C) key projection, applied to stream b
    wva: np.ndarray  # (C, C) value projection of stream a
    wvb: np.ndarray  # (C, C) value projection of stream b
    gate_a: np.ndarray  # () residual gain onto stream a
    gate_b: np.ndarray  # () residual gain onto stream b

    @classmethod
    def create(cls, channels: int, rng: np.random.Generator) -> "MixBlockParams":
        reduced = max(1, channels // 8)
        scale = 1.0 / math.sqrt(channels)
        return cls(
            wq=rng.normal(0.0, scale, (reduced, channels)),
            wk=rng.normal(0.0, scale, (reduced, channels)),
            wva=rng.normal(0.0, scale, (channels, channels)),
            wvb=rng.normal(0.0, scale, (channels, channels)),
            gate_a=np.zeros(()),
            gate_b=np.zeros(()),
        )

    @property
    def reduced(self) -> int:
        return self.wq.shape[0]


def _row_softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _check_pair(fa, fb, params, ndim):
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    if fa.shape != fb.shape or fa.ndim != ndim:
        raise ValueError(
            f"feature maps must share a {ndim}-D shape; got {fa.shape} and {fb.shape}"
        )
    if params.wq.shape[1] != fa.shape[-3]:
        raise ValueError(f"params expect {params.wq.shape[1]} channels, got {fa.shape[-3]}")
    return fa, fb


def mixblock_forward_batch(fa, fb, params: MixBlockParams, with_cache: bool = False):
    """Fuse (B, C, H, W) feature-map batches; returns the updated pair.

    With both gates at zero the inputs are returned bit-exactly (the
    attention path is still evaluated so gate gradients exist).
    """
    fa, fb = _check_pair(fa, fb, params, 4)
    b, c, h, w = fa.shape
    xa = fa.reshape(b, c, h * w)
    xb = fb.reshape(b, c, h * w)
    q = params.wq @ xa  # (B, C', L)
    k = params.wk @ xb
    scores = q.transpose(0, 2, 1) @ k / math.sqrt(params.reduced)  # (B, L, L)
    attn = _row_softmax(scores)
    va = params.wva @ xa
    vb = params.wvb @ xb
    ua = vb @ attn.transpose(0, 2, 1)  # b's values gathered for a's positions
    ub = va @ attn
    ga = float(params.gate_a)
    gb = float(params.gate_b)
    out_a = fa.copy() if ga == 0.0 else (xa + ga * ua).reshape(b, c, h, w)
    out_b = fb.copy() if gb == 0.0 else (xb + gb * ub).reshape(b, c, h, w)
    if with_cache:
        cache = {"xa": xa, "xb": xb, "q": q, "k": k, "attn": attn,
                 "va": va, "vb": vb, "ua": ua, "ub": ub,
                 "params": params, "shape": (b, c, h, w)}
        return out_a, out_b, cache
    return out_a, out_b


def mixblock_backward_batch(upstream_a, upstream_b, cache):
    """Exact reverse-mode gradients through mixblock_forward_batch.

    Returns (d_fa, d_fb, d_params); parameter gradients are summed over the
    batch and mirror MixBlockParams.
    """
    b, c, h, w = cache["shape"]
    ga_up = np.asarray(upstream_a, dtype=np.float64).reshape(b, c, h * w)
    gb_up = np.asarray(upstream_b, dtype=np.float64).reshape(b, c, h * w)
    p: MixBlockParams = cache["params"]
    xa, xb = cache["xa"], cache["xb"]
    attn, va, vb = cache["attn"], cache["va"], cache["vb"]
    scale = 1.0 / math.sqrt(p.reduced)

    d_gate_a = np.asarray(np.sum(ga_up * cache["ua"]))
    d_gate_b = np.asarray(np.sum(gb_up * cache["ub"]))
    dua = float(p.gate_a) * ga_up
    dub = float(p.gate_b) * gb_up

    dvb = dua @ attn
    dattn = dua.transpose(0, 2, 1) @ vb
    dva = dub @ attn.transpose(0, 2, 1)
    dattn += va.transpose(0, 2, 1) @ dub

    # softmax rows: dS = A * (dA - rowsum(dA * A))
    dscores = attn * (dattn - np.sum(dattn * attn, axis=-1, keepdims=True))
    dq = cache["k"] @ dscores.transpose(0, 2, 1) * scale
    dk = cache["q"] @ dscores * scale

    d_fa = ga_up + p.wva.T @ dva + p.wq.T @ dq
    d_fb = gb_up + p.wvb.T @ dvb + p.wk.T @ dk
    d_params = MixBlockParams(
        wq=np.tensordot(dq, xa, axes=([0, 2], [0, 2])),
        wk=np.tensordot(dk, xb, axes=([0, 2], [0, 2])),
        wva=np.tensordot(dva, xa, axes=([0, 2], [0, 2])),
        wvb=np.tensordot(dvb, xb, axes=([0, 2], [0, 2])),
        gate_a=d_gate_a,
        gate_b=d_gate_b,
    )
    return d_fa.reshape(b, c, h, w), d_fb.reshape(b, c, h, w), d_params


def mixblock_forward(fa, fb, params: MixBlockParams, with_cache: bool = False):
    """Fuse one (C, H, W) pair; see mixblock_forward_batch."""
    fa, fb = _check_pair(fa, fb, params, 3)
    result = mixblock_forward_batch(fa[None], fb[None], params, with_cache)
    if with_cache:
        return result[0][0], result[1][0], result[2]
    return result[0][0], result[1][0]


def mixblock_backward(upstream_a, upstream_b, cache):
    """Gradients for the single-pair forward; see mixblock_backward_batch."""
    _, c, h, w = cache["shape"]
    da, db, d_params = mixblock_backward_batch(
        np.asarray(upstream_a, dtype=np.float64).reshape(1, c, h, w),
        np.asarray(upstream_b, dtype=np.float64).reshape(1, c, h, w),
        cache,
    )
    return da[0], db[0], d_params
