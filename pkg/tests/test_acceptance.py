"""Acceptance gate: every criterion as one test, each printing a PASS line.

Criteria 8 and 9 share one 400-pair corpus and one set of trained variants
(session-scoped fixtures); together they dominate the suite's runtime.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from freqlens.dct import dct2, dct2_naive, idct2
from freqlens.experiments import (matched_baseline, train_and_eval,
                                  variant_config)
from freqlens.fad import fad_backward, fad_forward
from freqlens.filterbank import FilterBank, make_fad_bands, make_lfs_bands
from freqlens.lfs import lfs_backward, lfs_forward
from freqlens.metrics import ScoreSet, accuracy_at, auc, greedy_threshold
from freqlens.mixblock import (MixBlockParams, mixblock_backward,
                               mixblock_forward)
from freqlens.synth import CorpusSpec, build_corpus, read_manifest
from freqlens.toynet import ToyNetConfig, init_params, loss_and_grads

# settings shared by the two training experiments
EXPERIMENT_SEEDS = (0, 1, 2, 3, 4)
EXPERIMENT_CFG = dict(side=64, steps=300, batch_size=16, lr=0.01, log_every=100)
SPLIT_SEED = 0


def _report(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS - {detail}")


def test_criterion_01_dct_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_rt = 0.0
    worst_parseval = 0.0
    for _ in range(1000):
        h, w = rng.integers(1, 65, 2)
        plane = rng.standard_normal((h, w))
        spec = dct2(plane)
        worst_rt = max(worst_rt, float(np.abs(idct2(spec) - plane).max()))
        energy = float(np.sum(plane * plane))
        worst_parseval = max(
            worst_parseval, abs(float(np.sum(spec * spec)) - energy) / max(energy, 1e-30))
    assert worst_rt < 1e-9
    assert worst_parseval < 1e-9
    worst_naive = 0.0
    for shape in [(8, 8), (16, 16), (12, 5)]:
        plane = rng.standard_normal(shape)
        worst_naive = max(worst_naive, float(np.abs(dct2(plane) - dct2_naive(plane)).max()))
    assert worst_naive < 1e-10
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(1, f"roundtrip {worst_rt:.2e}, parseval {worst_parseval:.2e}, "
               f"naive {worst_naive:.2e}, {elapsed:.1f}s")


def test_criterion_02_filterbank_partitions():
    start = time.perf_counter()
    for size in (8, 10, 16, 64):
        for partition in (make_fad_bands(size), make_lfs_bands(size, 6)):
            masks = partition.masks
            assert np.array_equal(masks.sum(axis=0), np.ones((size, size)))
            assert set(np.unique(masks)) <= {0.0, 1.0}
    counts = [int(m.sum()) for m in make_fad_bands(8).masks]
    assert counts == [1, 2, 61]
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    _report(2, f"partitions exact for S in {{8,10,16,64}}, S=8 counts {counts}, "
               f"{elapsed:.2f}s")


def test_criterion_03_fad_reconstruction():
    start = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    worst_energy = 0.0
    for _ in range(100):
        side = int(rng.choice([8, 16, 32]))
        img = rng.random((side, side, 3))
        bank = FilterBank.decomposition(side)
        comps = fad_forward(img, bank)
        worst = max(worst, float(np.abs(comps.sum(axis=0) - img).max()))
        for c in range(3):
            spec = dct2(img[:, :, c])
            total = float(np.sum(spec**2))
            split = sum(float(np.sum((spec * m) ** 2)) for m in bank.partition.masks)
            worst_energy = max(worst_energy, abs(split - total) / total)
    assert worst < 1e-9
    assert worst_energy < 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report(3, f"reconstruction {worst:.2e}, energy split {worst_energy:.2e}, "
               f"{elapsed:.1f}s")


def _rel(numeric, analytic):
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)


def test_criterion_04_gradient_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(104)

    # decomposition gradients, h = 1e-4, tolerance 1e-4
    img = rng.random((8, 8, 3))
    bank = FilterBank.decomposition(8, raw=rng.normal(0, 0.3, (3, 8, 8)))
    up = rng.random((3, 8, 8, 3))
    dx, draw = fad_backward(up, img, bank)
    h = 1e-4
    worst_fad = 0.0
    for _ in range(15):
        b, u, v = rng.integers(0, 3), rng.integers(0, 8), rng.integers(0, 8)
        rp, rm = bank.raw.copy(), bank.raw.copy()
        rp[b, u, v] += h
        rm[b, u, v] -= h
        numeric = (
            float(np.sum(up * fad_forward(img, FilterBank.decomposition(8, raw=rp))))
            - float(np.sum(up * fad_forward(img, FilterBank.decomposition(8, raw=rm))))
        ) / (2 * h)
        worst_fad = max(worst_fad, _rel(numeric, draw[b, u, v]))
    for _ in range(15):
        i, j, k = rng.integers(0, 8), rng.integers(0, 8), rng.integers(0, 3)
        xp, xm = img.copy(), img.copy()
        xp[i, j, k] += h
        xm[i, j, k] -= h
        numeric = (float(np.sum(up * fad_forward(xp, bank)))
                   - float(np.sum(up * fad_forward(xm, bank)))) / (2 * h)
        worst_fad = max(worst_fad, _rel(numeric, dx[i, j, k]))
    assert worst_fad < 1e-4

    # statistics gradients, kink-guarded, tolerance 1e-3
    img = rng.random((14, 14, 3))
    bank = FilterBank.statistics(10, 6)
    up = rng.random((3, 3, 6))
    draw = lfs_backward(up, img, bank, 10, 2, 1e-12)
    eff = bank.effective()
    worst_lfs = 0.0
    checked = 0
    while checked < 20:
        b, u, v = rng.integers(0, 6), rng.integers(0, 10), rng.integers(0, 10)
        if abs(eff[b, u, v]) <= 1e-6:
            continue
        rp, rm = bank.raw.copy(), bank.raw.copy()
        rp[b, u, v] += 1e-5
        rm[b, u, v] -= 1e-5
        numeric = (
            float(np.sum(up * lfs_forward(img, FilterBank.statistics(10, 6, raw=rp), 10, 2)))
            - float(np.sum(up * lfs_forward(img, FilterBank.statistics(10, 6, raw=rm), 10, 2)))
        ) / 2e-5
        worst_lfs = max(worst_lfs, _rel(numeric, draw[b, u, v]))
        checked += 1
    assert worst_lfs < 1e-3

    # fusion block, all parameters and both inputs, h = 1e-5, tolerance 1e-4
    import dataclasses

    fa = rng.normal(0, 1, (2, 2, 2))
    fb = rng.normal(0, 1, (2, 2, 2))
    p = MixBlockParams.create(2, rng)
    p.gate_a = np.asarray(0.6)
    p.gate_b = np.asarray(-0.3)
    ua = rng.normal(0, 1, fa.shape)
    ub = rng.normal(0, 1, fb.shape)
    _, _, cache = mixblock_forward(fa, fb, p, with_cache=True)
    da, db, dp = mixblock_backward(ua, ub, cache)

    def mix_loss(params, xa, xb):
        oa, ob = mixblock_forward(xa, xb, params)
        return float(np.sum(ua * oa) + np.sum(ub * ob))

    worst_mix = 0.0
    h = 1e-5
    for name in ("wq", "wk", "wva", "wvb", "gate_a", "gate_b"):
        base = getattr(p, name)
        grad = getattr(dp, name)
        for idx in (np.ndindex(base.shape) if base.shape else [()]):
            bp, bm = base.copy(), base.copy()
            bp[idx] += h
            bm[idx] -= h
            numeric = (mix_loss(dataclasses.replace(p, **{name: bp}), fa, fb)
                       - mix_loss(dataclasses.replace(p, **{name: bm}), fa, fb)) / (2 * h)
            analytic = grad[idx] if base.shape else float(grad)
            worst_mix = max(worst_mix, _rel(numeric, analytic))
    assert worst_mix < 1e-4

    # end-to-end network, 20 sampled parameters, tolerance 1e-3
    cfg = ToyNetConfig(side=16, batch_size=1, steps=1, log_every=1)
    params = init_params(cfg)
    nudge = np.random.default_rng(7)
    for key in params:
        params[key] = np.asarray(params[key] + nudge.normal(0, 0.05, params[key].shape))
    x = rng.random((1, 16, 16, 3))
    y = np.array([1])
    _, grads = loss_and_grads(x, y, params, cfg)
    names = sorted(params)
    worst_net = 0.0
    checked = 0
    h = 1e-6
    while checked < 20:
        name = names[int(rng.integers(0, len(names)))]
        idx = tuple(rng.integers(0, s) for s in params[name].shape)
        probe = {k: v.copy() for k, v in params.items()}
        probe[name][idx] += h
        up_l, _ = loss_and_grads(x, y, probe, cfg)
        probe[name][idx] -= 2 * h
        dn_l, _ = loss_and_grads(x, y, probe, cfg)
        numeric = (up_l - dn_l) / (2 * h)
        analytic = grads[name][idx]
        if max(abs(numeric), abs(analytic)) < 1e-10:
            continue
        worst_net = max(worst_net, _rel(numeric, analytic))
        checked += 1
    assert worst_net < 1e-3

    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    _report(4, f"fad {worst_fad:.1e}, lfs {worst_lfs:.1e}, mix {worst_mix:.1e}, "
               f"net {worst_net:.1e}, {elapsed:.0f}s")


def test_criterion_05_mixblock_identity():
    rng = np.random.default_rng(105)
    fa = rng.normal(0, 1, (8, 4, 4))
    fb = rng.normal(0, 1, (8, 4, 4))
    p = MixBlockParams.create(8, rng)
    oa, ob, cache = mixblock_forward(fa, fb, p, with_cache=True)
    assert np.array_equal(oa, fa) and np.array_equal(ob, fb)
    rows = cache["attn"][0].sum(axis=1)
    assert np.abs(rows - 1.0).max() < 1e-9
    _report(5, "zero-gate identity bit-exact, attention rows sum to 1")


def test_criterion_06_lfs_contracts():
    bank = FilterBank.statistics(10, 6)
    q = lfs_forward(np.random.default_rng(106).random((64, 64, 3)), bank)
    assert q.shape == (28, 28, 6)
    q_const = lfs_forward(np.ones((16, 16, 1)), bank)
    assert np.allclose(q_const[0, 0], [1.0, -12, -12, -12, -12, -12], atol=1e-9)
    img = np.random.default_rng(107).random((24, 24, 3)) * 0.5
    delta = lfs_forward(2 * img, bank) - lfs_forward(img, bank)
    floored = (lfs_forward(img, bank) <= -11.999)
    assert np.abs(delta[~floored] - np.log10(2)).max() < 1e-9
    _report(6, "grid 28x28x6, constant-window q=(1,-12...), scale response log10(2)")


def test_criterion_07_metrics_oracle():
    rng = np.random.default_rng(108)
    for _ in range(100):
        n = int(rng.integers(2, 201))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        scores = np.round(rng.random(n), 2)
        sset = ScoreSet(ids=[str(i) for i in range(n)],
                        groups=[str(i) for i in range(n)],
                        labels=labels, scores=scores)
        fake = scores[labels == 1]
        real = scores[labels == 0]
        wins = sum(float(f > r) + 0.5 * float(f == r) for f in fake for r in real)
        assert auc(sset) == wins / (len(fake) * len(real))
        _, greedy = greedy_threshold(sset)
        assert greedy >= accuracy_at(sset, 0.5)
    worked = ScoreSet(ids=["a", "b"], groups=["a", "b"],
                      labels=np.array([0, 1]), scores=np.array([0.55, 0.58]))
    theta, acc = greedy_threshold(worked)
    assert theta == 0.56 and acc == 1.0
    assert accuracy_at(worked, 0.5) == 0.5
    _report(7, "rank AUC == pairwise on 100 sets, greedy >= acc@0.5, "
               "worked example theta=0.56")


@pytest.fixture(scope="session")
def lq_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("lq400")
    spec = CorpusSpec(n_pairs=400, side=64, tiers=("LQ",), seed=42)
    build_corpus(spec, root)
    return root, read_manifest(root / "manifest.csv")


@pytest.fixture(scope="session")
def ladder_results(lq_corpus):
    """Mean test AUC per variant over the experiment seeds, plus wall time."""
    root, samples = lq_corpus
    base = ToyNetConfig(seed=0, **EXPERIMENT_CFG)
    configs = {
        "baseline": matched_baseline(base),
        "fad": variant_config(base, "fad"),
        "two_stream": variant_config(base, "two_stream"),
        "full": variant_config(base, "full"),
    }
    start = time.perf_counter()
    results = {}
    for name, cfg in configs.items():
        aucs = []
        for seed in EXPERIMENT_SEEDS:
            report, _ = train_and_eval(root, samples, replace(cfg, seed=seed),
                                       SPLIT_SEED)
            aucs.append(report.auc)
        results[name] = aucs
        print(f"[ladder] {name}: aucs={[round(a, 3) for a in aucs]} "
              f"mean={np.mean(aucs):.3f}")
    results["wall_s"] = time.perf_counter() - start
    return results


def test_criterion_08_compression_robustness_gap(lq_corpus, ladder_results):
    base = ToyNetConfig(seed=0, **EXPERIMENT_CFG)
    from freqlens.toynet import param_count

    n_base = param_count(matched_baseline(base))
    n_full = param_count(variant_config(base, "full"))
    assert abs(n_base - n_full) / n_full <= 0.10
    mean_base = float(np.mean(ladder_results["baseline"]))
    mean_full = float(np.mean(ladder_results["full"]))
    gap = mean_full - mean_base
    assert gap >= 0.05, (
        f"full {mean_full:.3f} vs baseline {mean_base:.3f}: gap {gap:.3f}")
    _report(8, f"mean AUC full {mean_full:.3f} vs matched baseline "
               f"{mean_base:.3f} (params {n_full} vs {n_base}), gap {gap:.3f}, "
               f"ladder wall {ladder_results['wall_s']:.0f}s")


def test_criterion_09_branch_ablation_monotonicity(ladder_results):
    sequence = ["baseline", "fad", "two_stream", "full"]
    means = [float(np.mean(ladder_results[name])) for name in sequence]
    inversions = [max(0.0, means[i] - means[i + 1]) for i in range(len(means) - 1)]
    violations = [d for d in inversions if d > 1e-12]
    assert len(violations) <= 1, f"means {means}: more than one inversion"
    assert all(d <= 0.01 for d in violations), f"means {means}: inversion too large"
    _report(9, "mean AUC ladder " + " -> ".join(
        f"{name}={mean:.3f}" for name, mean in zip(sequence, means)))


def test_criterion_10_pipeline_determinism(tmp_path):
    from freqlens.cli import main

    gen_args = ["--set", "pairs=3", "--set", "tiers=RAW,LQ", "--set", "side=32",
                "--seed", "11"]
    train_args = ["--seed", "11", "--set", "side=32", "--set", "steps=5",
                  "--set", "batch=4", "--set", "channels=4,6,8",
                  "--set", "log_every=2"]
    outputs = {}
    for run in ("one", "two"):
        corpus = tmp_path / f"corpus_{run}"
        assert main(["gen", "--out", str(corpus), *gen_args]) == 0
        run_dir = tmp_path / f"train_{run}"
        assert main(["train", "--manifest", str(corpus / "manifest.csv"),
                     "--out", str(run_dir), *train_args]) == 0
        rep_dir = tmp_path / f"eval_{run}"
        assert main(["eval", "--checkpoint", str(run_dir / "checkpoint.f3ck"),
                     "--manifest", str(corpus / "manifest.csv"),
                     "--out", str(rep_dir), *train_args]) == 0
        corpus_bytes = b"".join((corpus / p.path).read_bytes()
                                for p in read_manifest(corpus / "manifest.csv"))
        outputs[run] = (
            corpus_bytes,
            (corpus / "manifest.csv").read_bytes(),
            (run_dir / "checkpoint.f3ck").read_bytes(),
            (run_dir / "trace.csv").read_bytes(),
            (rep_dir / "report.txt").read_bytes(),
        )
    assert outputs["one"] == outputs["two"]
    _report(10, "gen/train/eval byte-identical across two runs at seed 11")
