"""Minimal batched layers with hand-written backward passes.

All activations are (B, C, H, W) float64. Convolutions are 3x3, stride 1,
pad 1 (im2col + matmul); pooling is 2x2 mean with stride 2.
"""

import numpy as np


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)


def _im2col(x):
    b, c, h, w = x.shape
    pad = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, h, w))
    for i in range(3):
        for j in range(3):
            cols[:, :, 3 * i + j] = pad[:, :, i:i + h, j:j + w]
    return cols.reshape(b, c * 9, h * w)


def _col2im(dcols, b, c, h, w):
    dpad = np.zeros((b, c, h + 2, w + 2))
    d = dcols.reshape(b, c, 3, 3, h, w)
    for i in range(3):
        for j in range(3):
            dpad[:, :, i:i + h, j:j + w] += d[:, :, i, j]
    return dpad[:, :, 1:h + 1, 1:w + 1]


def conv2d_forward(x, weight, bias):
    """3x3 same-size convolution. weight (O, C, 3, 3), bias (O,)."""
    b, c, h, w = x.shape
    o = weight.shape[0]
    cols = _im2col(x)
    flat = weight.reshape(o, c * 9) @ cols + bias[:, None]
    out = flat.reshape(b, o, h, w)
    return out, (x.shape, cols, weight)


def conv2d_backward(gout, cache):
    (b, c, h, w), cols, weight = cache
    o = weight.shape[0]
    g = np.ascontiguousarray(gout.reshape(b, o, h * w))
    dw = np.zeros((o, c * 9))
    for i in range(b):  # per-sample GEMMs avoid one large transposed copy
        dw += g[i] @ cols[i].T
    db = g.sum(axis=(0, 2))
    dcols = weight.reshape(o, c * 9).T @ g
    dx = _col2im(dcols, b, c, h, w)
    return dx, dw.reshape(weight.shape), db


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(gout, mask):
    return gout * mask


def avgpool2_forward(x):
    """2x2 mean pooling, stride 2; spatial dims must be even."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2 needs even spatial dims, got {h}x{w}")
    out = x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return out, (h, w)


def avgpool2_backward(gout, cache):
    h, w = cache
    g = np.repeat(np.repeat(gout, 2, axis=2), 2, axis=3)
    return g * 0.25


def global_avgpool_forward(x):
    b, c, h, w = x.shape
    return x.mean(axis=(2, 3)), (h, w)


def global_avgpool_backward(gout, cache):
    h, w = cache
    return np.broadcast_to(gout[:, :, None, None], gout.shape + (h, w)) / (h * w)


def linear_forward(x, weight, bias):
    """x (B, F), weight (O, F), bias (O,)."""
    return x @ weight.T + bias, (x, weight)


def linear_backward(gout, cache):
    x, weight = cache
    dw = gout.T @ x
    db = gout.sum(axis=0)
    dx = gout @ weight
    return dx, dw, db


def channel_affine_forward(x, weight, bias):
    """Per-channel scale and shift of (B, C, H, W); weight/bias are (C,)."""
    out = x * weight[None, :, None, None] + bias[None, :, None, None]
    return out, (x, weight)


def channel_affine_backward(gout, cache):
    x, weight = cache
    dw = np.sum(gout * x, axis=(0, 2, 3))
    db = np.sum(gout, axis=(0, 2, 3))
    dx = gout * weight[None, :, None, None]
    return dx, dw, db


def resize_nearest_forward(x, out_h, out_w):
    """Nearest-neighbor resize of (B, C, H, W) by floor index mapping."""
    b, c, h, w = x.shape
    ys = (np.arange(out_h) * h) // out_h
    xs = (np.arange(out_w) * w) // out_w
    return x[:, :, ys[:, None], xs[None, :]], (x.shape, ys, xs)


def resize_nearest_backward(gout, cache):
    (b, c, h, w), ys, xs = cache
    dx = np.zeros((b, c, h, w))
    np.add.at(dx, (slice(None), slice(None), ys[:, None], xs[None, :]), gout)
    return dx


def softmax(logits):
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean cross-entropy over the batch; returns (loss, dlogits, probs)."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,) or labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must be integers in [0, {k}) with shape ({n},)")
    probs = softmax(logits)
    picked = probs[np.arange(n), labels]
    loss = -np.mean(np.log(np.maximum(picked, 1e-300)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n, probs
