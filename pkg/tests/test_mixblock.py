import dataclasses

import numpy as np
import pytest

from freqlens.mixblock import (MixBlockParams, mixblock_backward,
                               mixblock_forward)


def _params(channels, rng, gates=(0.0, 0.0)):
    p = MixBlockParams.create(channels, rng)
    p.gate_a = np.asarray(gates[0], dtype=np.float64)
    p.gate_b = np.asarray(gates[1], dtype=np.float64)
    return p


def _naive_forward(fa, fb, p):
    """Dense small-matrix reference evaluation with explicit loops."""
    c, h, w = fa.shape
    length = h * w
    xa = fa.reshape(c, length)
    xb = fb.reshape(c, length)
    q = p.wq @ xa
    k = p.wk @ xb
    scores = np.empty((length, length))
    for i in range(length):
        for j in range(length):
            scores[i, j] = float(q[:, i] @ k[:, j]) / np.sqrt(p.reduced)
    attn = np.empty_like(scores)
    for i in range(length):
        e = np.exp(scores[i] - scores[i].max())
        attn[i] = e / e.sum()
    va = p.wva @ xa
    vb = p.wvb @ xb
    out_a = xa.copy()
    out_b = xb.copy()
    for i in range(length):
        gathered = sum(attn[i, j] * vb[:, j] for j in range(length))
        out_a[:, i] = xa[:, i] + float(p.gate_a) * gathered
    for j in range(length):
        pushed = sum(attn[i, j] * va[:, i] for i in range(length))
        out_b[:, j] = xb[:, j] + float(p.gate_b) * pushed
    return out_a.reshape(c, h, w), out_b.reshape(c, h, w)


def test_zero_gates_identity_bit_exact():
    rng = np.random.default_rng(0)
    for shape in [(2, 2, 2), (8, 4, 4), (3, 5, 5)]:
        fa = rng.normal(0, 1, shape)
        fb = rng.normal(0, 1, shape)
        oa, ob = mixblock_forward(fa, fb, _params(shape[0], rng))
        assert np.array_equal(oa, fa) and np.array_equal(ob, fb)


def test_attention_rows_are_stochastic():
    rng = np.random.default_rng(1)
    fa = rng.normal(0, 2, (4, 3, 3))
    fb = rng.normal(0, 2, (4, 3, 3))
    _, _, cache = mixblock_forward(fa, fb, _params(4, rng, (0.5, 0.5)), with_cache=True)
    attn = cache["attn"][0]
    assert np.abs(attn.sum(axis=1) - 1.0).max() < 1e-9
    assert attn.min() >= 0.0 and attn.max() <= 1.0


def test_forward_matches_dense_oracle():
    rng = np.random.default_rng(2)
    fa = rng.normal(0, 1, (2, 2, 2))
    fb = rng.normal(0, 1, (2, 2, 2))
    p = _params(2, rng, (0.8, -0.6))
    oa, ob = mixblock_forward(fa, fb, p)
    na, nb = _naive_forward(fa, fb, p)
    assert np.abs(oa - na).max() < 1e-9
    assert np.abs(ob - nb).max() < 1e-9


def test_backward_zero_upstream():
    rng = np.random.default_rng(3)
    fa = rng.normal(0, 1, (2, 2, 2))
    fb = rng.normal(0, 1, (2, 2, 2))
    _, _, cache = mixblock_forward(fa, fb, _params(2, rng, (0.4, 0.2)), with_cache=True)
    da, db, dp = mixblock_backward(np.zeros_like(fa), np.zeros_like(fb), cache)
    assert np.abs(da).max() == 0.0 and np.abs(db).max() == 0.0
    for name in ("wq", "wk", "wva", "wvb", "gate_a", "gate_b"):
        assert np.abs(getattr(dp, name)).max() == 0.0


def test_gate_gradient_at_zero_gates():
    rng = np.random.default_rng(4)
    fa = rng.normal(0, 1, (4, 3, 3))
    fb = rng.normal(0, 1, (4, 3, 3))
    p = _params(4, rng)
    oa, ob, cache = mixblock_forward(fa, fb, p, with_cache=True)
    ua = rng.normal(0, 1, fa.shape)
    ub = rng.normal(0, 1, fb.shape)
    da, db, dp = mixblock_backward(ua, ub, cache)
    # residual path only, plus gate gradient = <upstream, attended value>
    assert np.array_equal(da, ua) and np.array_equal(db, ub)
    assert float(dp.gate_a) == pytest.approx(
        float(np.sum(ua.reshape(4, 9) * cache["ua"][0])), rel=1e-12)
    assert float(dp.gate_b) == pytest.approx(
        float(np.sum(ub.reshape(4, 9) * cache["ub"][0])), rel=1e-12)


def test_full_finite_difference_check():
    rng = np.random.default_rng(5)
    fa = rng.normal(0, 1, (2, 2, 2))
    fb = rng.normal(0, 1, (2, 2, 2))
    p = _params(2, rng, (0.7, -0.4))
    ua = rng.normal(0, 1, fa.shape)
    ub = rng.normal(0, 1, fb.shape)
    _, _, cache = mixblock_forward(fa, fb, p, with_cache=True)
    da, db, dp = mixblock_backward(ua, ub, cache)

    def loss(params, xa, xb):
        oa, ob = mixblock_forward(xa, xb, params)
        return float(np.sum(ua * oa) + np.sum(ub * ob))

    h = 1e-5
    worst = 0.0
    for name in ("wq", "wk", "wva", "wvb", "gate_a", "gate_b"):
        base = getattr(p, name)
        grad = getattr(dp, name)
        for idx in (np.ndindex(base.shape) if base.shape else [()]):
            bp = base.copy()
            bp[idx] += h
            bm = base.copy()
            bm[idx] -= h
            numeric = (loss(dataclasses.replace(p, **{name: bp}), fa, fb)
                       - loss(dataclasses.replace(p, **{name: bm}), fa, fb)) / (2 * h)
            analytic = grad[idx] if base.shape else float(grad)
            worst = max(worst, abs(numeric - analytic)
                        / max(abs(numeric), abs(analytic), 1e-8))
    for arr, grad, pick in ((fa, da, 0), (fb, db, 1)):
        for idx in np.ndindex(arr.shape):
            xp = arr.copy()
            xp[idx] += h
            xm = arr.copy()
            xm[idx] -= h
            args_p = (xp, fb) if pick == 0 else (fa, xp)
            args_m = (xm, fb) if pick == 0 else (fa, xm)
            numeric = (loss(p, *args_p) - loss(p, *args_m)) / (2 * h)
            worst = max(worst, abs(numeric - grad[idx])
                        / max(abs(numeric), abs(grad[idx]), 1e-8))
    assert worst < 1e-4


def test_spatial_permutation_equivariance():
    rng = np.random.default_rng(6)
    fa = rng.normal(0, 1, (3, 2, 4))
    fb = rng.normal(0, 1, (3, 2, 4))
    p = _params(3, rng, (0.9, 0.3))
    perm = rng.permutation(8)
    oa, ob = mixblock_forward(fa, fb, p)
    pa = fa.reshape(3, 8)[:, perm].reshape(3, 2, 4)
    pb = fb.reshape(3, 8)[:, perm].reshape(3, 2, 4)
    qa, qb = mixblock_forward(pa, pb, p)
    assert np.abs(qa - oa.reshape(3, 8)[:, perm].reshape(3, 2, 4)).max() < 1e-12
    assert np.abs(qb - ob.reshape(3, 8)[:, perm].reshape(3, 2, 4)).max() < 1e-12


def test_shape_mismatch_rejected():
    rng = np.random.default_rng(7)
    p = _params(2, rng)
    with pytest.raises(ValueError):
        mixblock_forward(np.zeros((2, 2, 2)), np.zeros((2, 3, 2)), p)
    with pytest.raises(ValueError):
        mixblock_forward(np.zeros((4, 2, 2)), np.zeros((4, 2, 2)), p)
