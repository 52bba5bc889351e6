"""Shared train/evaluate harness for ablations and directional experiments.

Corpora are split train/val/test by pair id so a fake never sees its real
sibling across splits. Branch variants follow the ablation ladder: pixel
baseline, decomposition stream only, statistics stream only, both streams,
both plus fusion.
"""

import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import DataError, seed_stream
from .image import load_image
from .metrics import EvalReport, ScoreSet, val_test_protocol
from .toynet import ToyNetConfig, param_count, predict_scores, train

BRANCH_VARIANTS = ("baseline", "fad", "lfs", "two_stream", "full")


def variant_config(base: ToyNetConfig, variant: str) -> ToyNetConfig:
    if variant == "baseline":
        return replace(base, stream_a="pixels", use_lfs=False, mix_after=())
    if variant == "fad":
        return replace(base, stream_a="fad", use_lfs=False, mix_after=())
    if variant == "lfs":
        return replace(base, stream_a="none", use_lfs=True, mix_after=())
    if variant == "two_stream":
        return replace(base, stream_a="fad", use_lfs=True, mix_after=())
    if variant == "full":
        return replace(base, stream_a="fad", use_lfs=True, mix_after=(2, 3))
    raise ValueError(f"unknown variant {variant!r}; expected one of {BRANCH_VARIANTS}")


def matched_baseline(full_cfg: ToyNetConfig, tolerance: float = 0.10) -> ToyNetConfig:
    """Pixel-only baseline with stage widths scaled to match the full model's
    parameter count within the given tolerance."""
    target = param_count(variant_config(full_cfg, "full"))
    base = variant_config(full_cfg, "baseline")
    best = None
    for f in np.linspace(1.0, 8.0, 281):
        cfg = replace(base, channels=tuple(max(1, round(c * f)) for c in full_cfg.channels))
        diff = abs(param_count(cfg) - target) / target
        if best is None or diff < best[0]:
            best = (diff, cfg)
    if best[0] > tolerance:
        raise ValueError(f"could not match parameter count within {tolerance:.0%}")
    return best[1]


def split_by_pair(pair_ids, seed: int, val_fraction: float, test_fraction: float) -> dict:
    """pair id -> 'train' | 'val' | 'test', deterministic in seed."""
    pairs = sorted(set(int(p) for p in pair_ids))
    rng = seed_stream(seed, "split")
    order = rng.permutation(len(pairs))
    n_val = max(1, round(val_fraction * len(pairs)))
    n_test = max(1, round(test_fraction * len(pairs)))
    if n_val + n_test >= len(pairs):
        raise DataError(f"{len(pairs)} pairs cannot support the requested split")
    assignment = {}
    for rank, idx in enumerate(order):
        if rank < n_val:
            split = "val"
        elif rank < n_val + n_test:
            split = "test"
        else:
            split = "train"
        assignment[pairs[idx]] = split
    return assignment


def load_samples(root, samples):
    """Stack manifest samples into (images, labels, pair_ids, groups)."""
    root = Path(root)
    images = np.stack([load_image(root / s.path) for s in samples])
    labels = np.array([1 if s.label == "fake" else 0 for s in samples], dtype=np.int64)
    pair_ids = np.array([s.pair_id for s in samples], dtype=np.int64)
    groups = [f"{s.pair_id}:{s.label}:{s.tier}" for s in samples]
    return images, labels, pair_ids, groups


def _subset_scores(samples, images, labels, groups, mask, params, cfg) -> ScoreSet:
    idx = np.nonzero(mask)[0]
    scores = predict_scores(images[idx], params, cfg)
    return ScoreSet(
        ids=[samples[i].path for i in idx],
        groups=[groups[i] for i in idx],
        labels=labels[idx],
        scores=scores,
    )


def train_and_eval(root, samples, cfg: ToyNetConfig, split_seed: int,
                   val_fraction: float = 0.2, test_fraction: float = 0.2):
    """Train on the pair-level train split, fit theta on val, report on test.

    Returns (EvalReport, wall_seconds).
    """
    images, labels, pair_ids, groups = load_samples(root, samples)
    assignment = split_by_pair(pair_ids, split_seed, val_fraction, test_fraction)
    split = np.array([assignment[int(p)] for p in pair_ids])
    start = time.perf_counter()
    result = train(cfg, images[split == "train"], labels[split == "train"])
    val_set = _subset_scores(samples, images, labels, groups, split == "val",
                             result.params, cfg)
    test_set = _subset_scores(samples, images, labels, groups, split == "test",
                              result.params, cfg)
    report = val_test_protocol(val_set, test_set)
    return report, time.perf_counter() - start


def seed_mean_auc(root, samples, cfg: ToyNetConfig, seeds, split_seed: int) -> float:
    """Mean test AUC of one configuration across training seeds."""
    aucs = []
    for seed in seeds:
        report, _ = train_and_eval(root, samples, replace(cfg, seed=seed), split_seed)
        aucs.append(report.auc)
    return float(np.mean(aucs))
