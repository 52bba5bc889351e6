"""Command-line front end: gen, extract, train, eval, ablate, bench.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 I/O error.
Every command is deterministic given the config and seed (bench timings
excepted).
"""

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .bench import format_rows, run_bench
from .config import ConfigError, DataError, config_hash, load_config
from .experiments import (BRANCH_VARIANTS, load_samples, split_by_pair,
                          train_and_eval, variant_config)
from .fad import fad_forward, stack_components
from .filterbank import FilterBank
from .image import load_image
from .lfs import lfs_forward
from .metrics import (ScoreSet, read_scores_csv, report_text, same_set_report,
                      val_test_protocol, write_roc_csv)
from .synth import CorpusSpec, build_corpus, read_manifest
from .toynet import ToyNetConfig, predict_scores, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="freqlens",
                     description="frequency-domain forgery-clue toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="flat key = value config file")
        sp.add_argument("--seed", type=int, help="root seed override")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")

    sp = sub.add_parser("gen", help="generate a synthetic corpus")
    common(sp)

    sp = sub.add_parser("extract", help="dump decomposition/statistics features")
    common(sp)
    sp.add_argument("--input", type=Path, required=True, help="PNG/JPEG file or directory")
    sp.add_argument("--mode", choices=("fad", "lfs", "both"), default="both")
    sp.add_argument("--checkpoint", type=Path, help="take filter state from a checkpoint")

    sp = sub.add_parser("train", help="train the two-stream classifier")
    common(sp)
    sp.add_argument("--manifest", type=Path, required=True)

    sp = sub.add_parser("eval", help="evaluate a checkpoint or a scores CSV")
    common(sp)
    sp.add_argument("--checkpoint", type=Path)
    sp.add_argument("--manifest", type=Path)
    sp.add_argument("--scores-csv", type=Path, help="evaluate raw scores without a model")
    sp.add_argument("--roc-csv", type=Path, help="also write ROC points here")

    sp = sub.add_parser("ablate", help="sweep one axis and emit a results table")
    common(sp)
    sp.add_argument("--axis", required=True, choices=("window", "stride", "bands", "branch"))
    sp.add_argument("--manifest", type=Path, required=True)

    sp = sub.add_parser("bench", help="time the transform kernels")
    common(sp)
    return parser


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required for this command")
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_gen(args, cfg) -> int:
    out = _require_out(args)
    spec = CorpusSpec(n_pairs=cfg["pairs"], side=cfg["side"],
                      manipulations=tuple(cfg["manipulations"]),
                      tiers=tuple(cfg["tiers"]), seed=cfg["seed"])
    samples = build_corpus(spec, out)
    print(f"wrote {len(samples)} images under {out} (manifest.csv included)")
    return 0


def _filter_bank_state(checkpoint_path, cfg):
    fad_raw = None
    lfs_raw = None
    if checkpoint_path is not None:
        ckpt = formats.load_checkpoint(checkpoint_path)
        fad_raw = ckpt.params.get("fad_fw")
        lfs_raw = ckpt.params.get("lfs_hw")
    return fad_raw, lfs_raw


def cmd_extract(args, cfg) -> int:
    out = _require_out(args)
    if args.input.is_dir():
        paths = sorted(args.input.glob("*.png")) + sorted(args.input.glob("*.jpg"))
        if not paths:
            raise DataError(f"no PNG/JPEG files under {args.input}")
    else:
        paths = [args.input]
    fad_raw, lfs_raw = _filter_bank_state(args.checkpoint, cfg)
    dtype = cfg["dump_dtype"]
    written = 0
    for path in paths:
        img = load_image(path)
        stem = path.stem
        if args.mode in ("fad", "both"):
            side = img.shape[0]
            bank = FilterBank.decomposition(side, raw=fad_raw)
            write = stack_components(fad_forward(img, bank))
            formats.write_feature_dump(out / f"{stem}.fad.f3ft", write, dtype)
            written += 1
        if args.mode in ("lfs", "both"):
            bank = FilterBank.statistics(cfg["lfs_window"], cfg["lfs_bands"], raw=lfs_raw)
            q = lfs_forward(img, bank, cfg["lfs_window"], cfg["lfs_stride"], cfg["lfs_eps"])
            formats.write_feature_dump(out / f"{stem}.lfs.f3ft", q, dtype)
            written += 1
    print(f"wrote {written} feature dumps under {out}")
    return 0


def _load_manifest_arrays(manifest_path, cfg):
    samples = read_manifest(manifest_path)
    tier = cfg["train_tier"]
    if tier:
        samples = [s for s in samples if s.tier == tier]
        if not samples:
            raise DataError(f"manifest has no rows for tier {tier!r}")
    return samples, manifest_path.parent


def cmd_train(args, cfg) -> int:
    out = _require_out(args)
    samples, root = _load_manifest_arrays(args.manifest, cfg)
    images, labels, _, _ = load_samples(root, samples)
    net_cfg = ToyNetConfig.from_flat(cfg)
    result = train(net_cfg, images, labels)
    rng_words = formats.rng_state_words(result.rng)
    formats.save_checkpoint(out / "checkpoint.f3ck", result.params,
                            config_hash(cfg), result.step, rng_words)
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in result.trace:
            writer.writerow([step, repr(loss)])
    print(f"final loss {result.trace[-1][1]:.6f} after {result.step} steps; "
          f"checkpoint at {out / 'checkpoint.f3ck'}")
    return 0


def cmd_eval(args, cfg) -> int:
    if args.scores_csv is not None:
        scores = read_scores_csv(args.scores_csv)
        report = same_set_report(scores)
    else:
        if args.checkpoint is None or args.manifest is None:
            raise ConfigError("eval needs either --scores-csv or both "
                              "--checkpoint and --manifest")
        ckpt = formats.load_checkpoint(args.checkpoint)
        if ckpt.config_hash != config_hash(cfg):
            print("warning: checkpoint was trained under a different config",
                  file=sys.stderr)
        samples, root = _load_manifest_arrays(args.manifest, cfg)
        images, labels, pair_ids, groups = load_samples(root, samples)
        net_cfg = ToyNetConfig.from_flat(cfg)
        assignment = split_by_pair(pair_ids, cfg["seed"], cfg["val_fraction"],
                                   cfg["test_fraction"])
        split = np.array([assignment[int(p)] for p in pair_ids])

        def subset(mask):
            idx = np.nonzero(mask)[0]
            return ScoreSet(ids=[samples[i].path for i in idx],
                            groups=[groups[i] for i in idx],
                            labels=labels[idx],
                            scores=predict_scores(images[idx], ckpt.params, net_cfg))

        report = val_test_protocol(subset(split == "val"), subset(split == "test"))
    text = report_text(report)
    print(text, end="")
    if args.out is not None:
        out = _require_out(args)
        with open(out / "report.txt", "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.roc_csv is not None:
        write_roc_csv(args.roc_csv, report.roc)
    return 0


def _ablate_variants(axis, cfg, base: ToyNetConfig):
    if axis == "window":
        for w in cfg["ablate_windows"]:
            bands = min(cfg["lfs_bands"], 2 * (w - 1) + 1)  # keep bands legal for tiny windows
            yield f"window={w}", replace(base, lfs_window=w, lfs_bands=bands)
    elif axis == "stride":
        for s in cfg["ablate_strides"]:
            yield f"stride={s}", replace(base, lfs_stride=s)
    elif axis == "bands":
        for m in cfg["ablate_bands"]:
            yield f"bands={m}", replace(base, lfs_bands=m)
    else:
        for name in BRANCH_VARIANTS:
            yield name, variant_config(base, name)


def cmd_ablate(args, cfg) -> int:
    out = _require_out(args)
    samples, root = _load_manifest_arrays(args.manifest, cfg)
    base = ToyNetConfig.from_flat(cfg)
    rows = []
    for name, variant in _ablate_variants(args.axis, cfg, base):
        report, wall = train_and_eval(root, samples, variant, cfg["seed"],
                                      cfg["val_fraction"], cfg["test_fraction"])
        rows.append((name, report.auc, report.acc_greedy, wall))
        print(f"{name}: auc={report.auc:.4f} acc_greedy={report.acc_greedy:.4f} "
              f"({wall:.1f}s)")
    table = out / f"ablate_{args.axis}.csv"
    with open(table, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "auc", "acc_greedy", "wall_s"])
        for name, auc_, acc, wall in rows:
            writer.writerow([name, repr(auc_), repr(acc), f"{wall:.3f}"])
    print(f"table written to {table}")
    return 0


def cmd_bench(args, cfg) -> int:
    rows = run_bench(cfg)
    text = format_rows(rows)
    print(text, end="")
    if args.out is not None:
        out = _require_out(args)
        with open(out / "bench.csv", "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


_DISPATCH = {
    "gen": cmd_gen,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return _DISPATCH[args.command](args, cfg)
    except (DataError, formats.FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
