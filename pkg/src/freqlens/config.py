"""Flat key = value configuration and deterministic seed derivation.

One document carries every tunable; CLI flags override file values and both
override the defaults below. Unknown keys are rejected so typos fail loudly.
All randomness flows from the single root seed through named streams
(stream seed = truncated SHA-256 of "root:purpose").
"""

import hashlib

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 1."""


class DataError(Exception):
    """Well-formed inputs with inconsistent content; maps to exit code 2."""


DEFAULTS = {
    # geometry and feature extraction
    "side": 64,
    "fad_bands": 3,
    "lfs_window": 10,
    "lfs_stride": 2,
    "lfs_bands": 6,
    "lfs_eps": 1e-12,
    # quality tiers
    "hq_quality": 75,
    "lq_quality": 30,
    # corpus generation
    "pairs": 100,
    "manipulations": ["blur_splice", "resample", "checkerboard"],
    "tiers": ["RAW", "HQ", "LQ"],
    # model / training
    "stream_a": "fad",
    "use_lfs": True,
    "mix_after": [2, 3],
    "channels": [8, 16, 32],
    "lr": 0.002,
    "momentum": 0.9,
    "batch": 32,
    "steps": 3000,
    "log_every": 50,
    "seed": 0,
    # evaluation protocol
    "train_tier": "",
    "val_fraction": 0.2,
    "test_fraction": 0.2,
    # persistence
    "dump_dtype": "f32",
    # benchmarking
    "bench_runs": 30,
    "bench_sizes": [16, 32, 64],
    "bench_window": 10,
    "bench_strides": [10, 2, 1],
    # ablation axes
    "ablate_windows": [2, 5, 10, 20, 30],
    "ablate_strides": [10, 6, 4, 3, 2, 1],
    "ablate_bands": [1, 3, 6, 12],
}


def _parse_value(key, raw):
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], int):
                return [int(s) for s in items]
            return items
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key!r}: {raw!r}") from exc


def parse_config_text(text) -> dict:
    """Parse `key = value` lines; '#' starts a comment; unknown keys rejected."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(path=None, overrides=None) -> dict:
    """Defaults, then file values, then override pairs; validated afterwards."""
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cfg.update(parse_config_text(fh.read()))
        except OSError:
            raise
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    def fail(msg):
        raise ConfigError(msg)

    if cfg["side"] < 32 or cfg["side"] % 8:
        fail("side must be >= 32 and a multiple of 8")
    if not 1 <= cfg["hq_quality"] <= 100 or not 1 <= cfg["lq_quality"] <= 100:
        fail("tier qualities must be in [1, 100]")
    if cfg["lfs_eps"] <= 0:
        fail("lfs_eps must be positive")
    if cfg["lfs_window"] < 2 or cfg["lfs_window"] > cfg["side"]:
        fail("lfs_window must be in [2, side]")
    if cfg["lfs_stride"] < 1:
        fail("lfs_stride must be >= 1")
    if cfg["lfs_bands"] < 1 or cfg["fad_bands"] != 3:
        fail("lfs_bands must be >= 1 and fad_bands is fixed at 3")
    if cfg["pairs"] < 1:
        fail("pairs must be >= 1")
    if not cfg["tiers"] or any(t not in ("RAW", "HQ", "LQ") for t in cfg["tiers"]):
        fail(f"tiers must be a non-empty subset of RAW,HQ,LQ, got {cfg['tiers']}")
    from .synth import MANIPULATIONS  # late import to avoid a cycle

    if not cfg["manipulations"] or any(m not in MANIPULATIONS for m in cfg["manipulations"]):
        fail(f"manipulations must be a non-empty subset of {','.join(MANIPULATIONS)}")
    if cfg["stream_a"] not in ("fad", "pixels", "none"):
        fail("stream_a must be fad, pixels or none")
    if cfg["stream_a"] == "none" and not cfg["use_lfs"]:
        fail("at least one stream is required")
    if not set(cfg["mix_after"]) <= {2, 3}:
        fail("mix_after entries must be stage indices 2 or 3")
    if len(cfg["channels"]) != 3 or any(c < 1 for c in cfg["channels"]):
        fail("channels must be three positive integers")
    if cfg["batch"] < 1 or cfg["steps"] < 1 or cfg["log_every"] < 1:
        fail("batch, steps and log_every must be >= 1")
    if cfg["lr"] <= 0 or not 0 <= cfg["momentum"] < 1:
        fail("lr must be positive and momentum in [0, 1)")
    if cfg["train_tier"] not in ("", "RAW", "HQ", "LQ"):
        fail("train_tier must be empty or one of RAW,HQ,LQ")
    if not 0 < cfg["val_fraction"] < 1 or not 0 < cfg["test_fraction"] < 1:
        fail("split fractions must be in (0, 1)")
    if cfg["val_fraction"] + cfg["test_fraction"] >= 1:
        fail("val_fraction + test_fraction must leave room for training data")
    if cfg["dump_dtype"] not in ("f32", "f64"):
        fail("dump_dtype must be f32 or f64")
    if cfg["bench_runs"] < 1:
        fail("bench_runs must be >= 1")


def config_text(cfg) -> str:
    """Canonical flat rendering (sorted keys) used for hashing and reports."""
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg) -> bytes:
    """32-byte digest of the canonical config rendering."""
    return hashlib.sha256(config_text(cfg).encode("utf-8")).digest()


def derive_seed(root_seed: int, purpose: str) -> int:
    """64-bit stream seed from the root seed and a purpose label."""
    digest = hashlib.sha256(f"{root_seed}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_stream(root_seed: int, purpose: str) -> np.random.Generator:
    """Independent named RNG stream derived from the root seed."""
    return np.random.default_rng(derive_seed(root_seed, purpose))
