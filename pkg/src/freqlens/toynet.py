"""Desk-scale two-stream classifier over decomposition and statistics features.

Stream a consumes either raw pixels or the band-decomposed components;
stream b consumes the local-frequency-statistics map, nearest-neighbor
aligned to half the input side (the spatial size entering stage 2). Each
stream is a three-stage conv stem (3x3 conv, relu, 2x2 mean pool); fusion
blocks may sit after stages 2 and 3. Pooled features concatenate into a
two-logit linear head. All gradients are hand-composed and everything is
deterministic given the config seed.
"""

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .config import DataError, seed_stream
from .fad import fad_backward_batch, fad_forward_batch
from .filterbank import FilterBank
from .lfs import lfs_backward, lfs_forward
from .mixblock import (MixBlockParams, mixblock_backward_batch,
                       mixblock_forward_batch)

STREAM_A_CHOICES = ("fad", "pixels", "none")


@dataclass(frozen=True)
class ToyNetConfig:
    side: int = 64
    in_channels: int = 3
    channels: tuple = (8, 16, 32)
    stream_a: str = "fad"
    use_lfs: bool = True
    mix_after: tuple = (2, 3)
    fad_bands: int = 3
    lfs_window: int = 10
    lfs_stride: int = 2
    lfs_bands: int = 6
    lfs_eps: float = 1e-12
    lr: float = 0.002
    momentum: float = 0.9
    batch_size: int = 32
    steps: int = 3000
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "mix_after", tuple(sorted(int(k) for k in self.mix_after)))
        if self.side < 16 or self.side % 8:
            raise ValueError("side must be >= 16 and divisible by 8")
        if self.in_channels not in (1, 3):
            raise ValueError("in_channels must be 1 or 3")
        if len(self.channels) != 3 or any(c < 1 for c in self.channels):
            raise ValueError("channels must be three positive stage widths")
        if self.stream_a not in STREAM_A_CHOICES:
            raise ValueError(f"stream_a must be one of {STREAM_A_CHOICES}")
        if self.stream_a == "none" and not self.use_lfs:
            raise ValueError("at least one stream is required")
        if not set(self.mix_after) <= {2, 3}:
            raise ValueError("mix_after entries must be 2 or 3")
        if self.mix_after and (self.stream_a == "none" or not self.use_lfs):
            raise ValueError("fusion requires both streams")
        if self.use_lfs:
            if not 2 <= self.lfs_window <= self.side:
                raise ValueError("lfs_window must be in [2, side]")
            if self.lfs_stride < 1 or self.lfs_eps <= 0 or self.lfs_bands < 1:
                raise ValueError("invalid statistics-stream settings")
        if self.batch_size < 1 or self.steps < 1 or self.log_every < 1:
            raise ValueError("batch_size, steps and log_every must be >= 1")
        if self.lr <= 0 or not 0 <= self.momentum < 1:
            raise ValueError("lr must be positive and momentum in [0, 1)")

    @classmethod
    def from_flat(cls, cfg: dict, **overrides) -> "ToyNetConfig":
        fields_ = dict(
            side=cfg["side"],
            channels=tuple(cfg["channels"]),
            stream_a=cfg["stream_a"],
            use_lfs=cfg["use_lfs"],
            mix_after=tuple(cfg["mix_after"]),
            fad_bands=cfg["fad_bands"],
            lfs_window=cfg["lfs_window"],
            lfs_stride=cfg["lfs_stride"],
            lfs_bands=cfg["lfs_bands"],
            lfs_eps=cfg["lfs_eps"],
            lr=cfg["lr"],
            momentum=cfg["momentum"],
            batch_size=cfg["batch"],
            steps=cfg["steps"],
            seed=cfg["seed"],
            log_every=cfg["log_every"],
        )
        fields_.update(overrides)
        return cls(**fields_)

    @property
    def stream_a_channels(self) -> int:
        if self.stream_a == "pixels":
            return self.in_channels
        if self.stream_a == "fad":
            return self.fad_bands * self.in_channels
        return 0

    @property
    def head_dim(self) -> int:
        streams = (self.stream_a != "none") + bool(self.use_lfs)
        return self.channels[2] * streams


def init_params(cfg: ToyNetConfig) -> dict:
    """Fresh parameter dict; draw order is fixed so seeds reproduce exactly."""
    rng = seed_stream(cfg.seed, "init")
    c1, c2, c3 = cfg.channels
    params = {}

    def conv(name, out_c, in_c):
        params[f"{name}_w"] = nn.he_normal(rng, (out_c, in_c, 3, 3), in_c * 9)
        params[f"{name}_b"] = np.zeros(out_c)

    if cfg.stream_a != "none":
        # input affine starts at identity; train() calibrates it to whiten
        # the per-channel feature scales (band components span decades)
        params["a_in_w"] = np.ones(cfg.stream_a_channels)
        params["a_in_b"] = np.zeros(cfg.stream_a_channels)
        conv("a1", c1, cfg.stream_a_channels)
        conv("a2", c2, c1)
        conv("a3", c3, c2)
    if cfg.use_lfs:
        params["b_in_w"] = np.ones(cfg.lfs_bands)
        params["b_in_b"] = np.zeros(cfg.lfs_bands)
        conv("b2", c2, cfg.lfs_bands)
        conv("b3", c3, c2)
    for stage in cfg.mix_after:
        channels = c2 if stage == 2 else c3
        mbp = MixBlockParams.create(channels, rng)
        params[f"mix{stage}_wq"] = mbp.wq
        params[f"mix{stage}_wk"] = mbp.wk
        params[f"mix{stage}_wva"] = mbp.wva
        params[f"mix{stage}_wvb"] = mbp.wvb
        params[f"mix{stage}_ga"] = mbp.gate_a
        params[f"mix{stage}_gb"] = mbp.gate_b
    # zero-initialized head keeps the initial loss at ln(2)
    params["head_w"] = np.zeros((2, cfg.head_dim))
    params["head_b"] = np.zeros(2)
    if cfg.stream_a == "fad":
        params["fad_fw"] = np.zeros((cfg.fad_bands, cfg.side, cfg.side))
    if cfg.use_lfs:
        params["lfs_hw"] = np.zeros((cfg.lfs_bands, cfg.lfs_window, cfg.lfs_window))
    return params


def param_count(cfg: ToyNetConfig) -> int:
    return sum(int(np.asarray(p).size) for p in init_params(cfg).values())


def _mix_params(params, stage) -> MixBlockParams:
    return MixBlockParams(
        wq=params[f"mix{stage}_wq"],
        wk=params[f"mix{stage}_wk"],
        wva=params[f"mix{stage}_wva"],
        wvb=params[f"mix{stage}_wvb"],
        gate_a=params[f"mix{stage}_ga"],
        gate_b=params[f"mix{stage}_gb"],
    )


def _stage_forward(x, params, name):
    out, c_conv = nn.conv2d_forward(x, params[f"{name}_w"], params[f"{name}_b"])
    out, c_relu = nn.relu_forward(out)
    out, c_pool = nn.avgpool2_forward(out)
    return out, (c_conv, c_relu, c_pool)


def _stage_backward(gout, cache, grads, name):
    c_conv, c_relu, c_pool = cache
    g = nn.avgpool2_backward(gout, c_pool)
    g = nn.relu_backward(g, c_relu)
    dx, dw, db = nn.conv2d_backward(g, c_conv)
    grads[f"{name}_w"] = grads.get(f"{name}_w", 0) + dw
    grads[f"{name}_b"] = grads.get(f"{name}_b", 0) + db
    return dx


def _mix_forward(fa, fb, params, stage):
    mbp = _mix_params(params, stage)
    return mixblock_forward_batch(fa, fb, mbp, with_cache=True)


def _mix_backward(ga, gb, cache, grads, stage):
    da, db, dp = mixblock_backward_batch(ga, gb, cache)
    for attr, key in (("wq", "wq"), ("wk", "wk"), ("wva", "wva"),
                      ("wvb", "wvb"), ("gate_a", "ga"), ("gate_b", "gb")):
        grads[f"mix{stage}_{key}"] = getattr(dp, attr)
    return da, db


def _stream_inputs(x, params, cfg: ToyNetConfig, caches: dict):
    """Raw per-stream inputs (before the input affine); fills feature caches."""
    b, h, w, _ = x.shape
    xa = xb = None
    if cfg.stream_a == "pixels":
        xa = x.transpose(0, 3, 1, 2)
    elif cfg.stream_a == "fad":
        bank = FilterBank.decomposition(cfg.side, raw=params["fad_fw"])
        comps = fad_forward_batch(x, bank)  # (B, N, S, S, C)
        xa = comps.transpose(0, 1, 4, 2, 3).reshape(b, -1, h, w)  # band-major stack
        caches["fad_bank"] = bank
    if cfg.use_lfs:
        bank = FilterBank.statistics(cfg.lfs_window, cfg.lfs_bands, raw=params["lfs_hw"])
        caches["lfs_bank"] = bank
        maps, lfs_caches = [], []
        for i in range(b):
            q, qc = lfs_forward(x[i], bank, cfg.lfs_window, cfg.lfs_stride,
                                cfg.lfs_eps, with_cache=True)
            maps.append(q)
            lfs_caches.append(qc)
        caches["lfs"] = lfs_caches
        grid = np.stack(maps).transpose(0, 3, 1, 2)  # (B, M, rows, cols)
        half = cfg.side // 2
        xb, caches["b_resize"] = nn.resize_nearest_forward(grid, half, half)
    return xa, xb


def forward(images, params, cfg: ToyNetConfig, with_caches: bool = False):
    """Batch logits; images are (B, side, side, in_channels) in [0, 1]."""
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    b, h, w, c = x.shape
    if (h, w, c) != (cfg.side, cfg.side, cfg.in_channels):
        raise ValueError(
            f"batch shape {x.shape[1:]} does not match config "
            f"({cfg.side}, {cfg.side}, {cfg.in_channels})"
        )
    caches = {"batch": x}
    fa = fb = None
    xa, xb = _stream_inputs(x, params, cfg, caches)

    if xa is not None:
        xa, caches["a_in"] = nn.channel_affine_forward(xa, params["a_in_w"], params["a_in_b"])
        fa, caches["a1"] = _stage_forward(xa, params, "a1")
        fa, caches["a2"] = _stage_forward(fa, params, "a2")

    if xb is not None:
        xb, caches["b_in"] = nn.channel_affine_forward(xb, params["b_in_w"], params["b_in_b"])
        fb, caches["b2"] = _stage_forward(xb, params, "b2")

    if 2 in cfg.mix_after:
        fa, fb, caches["mix2"] = _mix_forward(fa, fb, params, 2)

    if fa is not None:
        fa, caches["a3"] = _stage_forward(fa, params, "a3")
    if fb is not None:
        fb, caches["b3"] = _stage_forward(fb, params, "b3")

    if 3 in cfg.mix_after:
        fa, fb, caches["mix3"] = _mix_forward(fa, fb, params, 3)

    pooled = []
    if fa is not None:
        pa, caches["gap_a"] = nn.global_avgpool_forward(fa)
        pooled.append(pa)
    if fb is not None:
        pb, caches["gap_b"] = nn.global_avgpool_forward(fb)
        pooled.append(pb)
    feats = np.concatenate(pooled, axis=1)
    logits, caches["head"] = nn.linear_forward(feats, params["head_w"], params["head_b"])
    if with_caches:
        return logits, caches
    return logits


def loss_and_grads(images, labels, params, cfg: ToyNetConfig):
    """Mean cross-entropy and gradients for every learnable tensor."""
    logits, caches = forward(images, params, cfg, with_caches=True)
    loss, dlogits, _ = nn.cross_entropy(logits, np.asarray(labels))
    grads = {}
    dfeats, grads["head_w"], grads["head_b"] = nn.linear_backward(dlogits, caches["head"])

    c3 = cfg.channels[2]
    ga = gb = None
    offset = 0
    if cfg.stream_a != "none":
        ga = nn.global_avgpool_backward(dfeats[:, :c3], caches["gap_a"])
        offset = c3
    if cfg.use_lfs:
        gb = nn.global_avgpool_backward(dfeats[:, offset:offset + c3], caches["gap_b"])

    if 3 in cfg.mix_after:
        ga, gb = _mix_backward(ga, gb, caches["mix3"], grads, 3)
    if ga is not None:
        ga = _stage_backward(ga, caches["a3"], grads, "a3")
    if gb is not None:
        gb = _stage_backward(gb, caches["b3"], grads, "b3")
    if 2 in cfg.mix_after:
        ga, gb = _mix_backward(ga, gb, caches["mix2"], grads, 2)

    x = caches["batch"]
    if cfg.stream_a != "none":
        ga = _stage_backward(ga, caches["a2"], grads, "a2")
        dxa = _stage_backward(ga, caches["a1"], grads, "a1")
        dxa, grads["a_in_w"], grads["a_in_b"] = nn.channel_affine_backward(
            dxa, caches["a_in"])
        if cfg.stream_a == "fad":
            n_batch = x.shape[0]
            up = dxa.reshape(n_batch, cfg.fad_bands, cfg.in_channels,
                             cfg.side, cfg.side).transpose(0, 1, 3, 4, 2)
            _, grads["fad_fw"] = fad_backward_batch(up, x, caches["fad_bank"])
    if cfg.use_lfs:
        gb = _stage_backward(gb, caches["b2"], grads, "b2")
        gb, grads["b_in_w"], grads["b_in_b"] = nn.channel_affine_backward(
            gb, caches["b_in"])
        gmap = nn.resize_nearest_backward(gb, caches["b_resize"])
        bank = caches["lfs_bank"]
        dhw = np.zeros_like(params["lfs_hw"])
        for i in range(x.shape[0]):
            up = gmap[i].transpose(1, 2, 0)  # (rows, cols, M)
            dhw += lfs_backward(up, x[i], bank, cfg.lfs_window, cfg.lfs_stride,
                                cfg.lfs_eps, cache=caches["lfs"][i])
        grads["lfs_hw"] = dhw

    for key in params:
        if key not in grads:
            grads[key] = np.zeros_like(params[key])
    return loss, grads


def cosine_lr(base: float, step: int, total: int) -> float:
    """lr(t) = base * 0.5 * (1 + cos(pi * t / total)); reaches 0 at t = total."""
    return base * 0.5 * (1.0 + np.cos(np.pi * step / total))


def calibrate_input_normalizers(params, images, cfg: ToyNetConfig,
                                max_images: int = 256) -> None:
    """Point the input affines at unit-variance, zero-mean stream features.

    Uses a deterministic sample of the training set with the initial filter
    state; the affines remain ordinary trainable parameters afterwards.
    """
    x = np.asarray(images[:max_images], dtype=np.float64)
    xa, xb = _stream_inputs(x, params, cfg, {})
    for prefix, feats in (("a", xa), ("b", xb)):
        if feats is None:
            continue
        mu = feats.mean(axis=(0, 2, 3))
        sd = np.maximum(feats.std(axis=(0, 2, 3)), 1e-3)
        params[f"{prefix}_in_w"] = 1.0 / sd
        params[f"{prefix}_in_b"] = -mu / sd


@dataclass
class TrainResult:
    params: dict
    trace: list  # (step, loss) pairs
    config: ToyNetConfig
    rng: np.random.Generator = field(repr=False, default=None)
    step: int = 0


def train(cfg: ToyNetConfig, images, labels) -> TrainResult:
    """SGD with momentum under a cosine schedule; deterministic per seed."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if images.ndim != 4 or len(images) != len(labels) or len(images) == 0:
        raise DataError("dataset must be a non-empty (n, H, W, C) batch with labels")
    present = set(np.unique(labels).tolist())
    if present != {0, 1}:
        raise DataError(f"training needs both classes, found labels {sorted(present)}")
    params = init_params(cfg)
    calibrate_input_normalizers(params, images, cfg)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = seed_stream(cfg.seed, "shuffle")
    pool = []
    trace = []
    for t in range(cfg.steps):
        while len(pool) < cfg.batch_size:
            pool.extend(rng.permutation(len(images)).tolist())
        idx = np.asarray(pool[: cfg.batch_size])
        del pool[: cfg.batch_size]
        lr = cosine_lr(cfg.lr, t, cfg.steps)
        loss, grads = loss_and_grads(images[idx], labels[idx], params, cfg)
        for key in sorted(params):
            velocity[key] = np.asarray(cfg.momentum * velocity[key] - lr * grads[key])
            params[key] = np.asarray(params[key] + velocity[key])  # keeps 0-d gates ndarray
        if t % cfg.log_every == 0 or t == cfg.steps - 1:
            trace.append((t, float(loss)))
    return TrainResult(params=params, trace=trace, config=cfg, rng=rng, step=cfg.steps)


def predict_scores(images, params, cfg: ToyNetConfig, batch: int = 64) -> np.ndarray:
    """Probability of the fake class per image."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    scores = []
    for start in range(0, len(images), batch):
        logits = forward(images[start:start + batch], params, cfg)
        scores.append(nn.softmax(logits)[:, 1])
    return np.concatenate(scores)
