"""Timing harness for the transform kernels.

Before any timing, the separable path and every kernel backend are
cross-checked against the naive quadruple-sum oracle; a disagreement aborts
the benchmark. Cells report mean and standard deviation over a fixed number
of runs.
"""

import time

import numpy as np

from .dct import backends, dct2, dct2_naive, dct_basis


def crosscheck(tol: float = 1e-10) -> None:
    """Naive vs separable vs per-backend windowed transforms."""
    rng = np.random.default_rng(1486)
    plane = rng.standard_normal((8, 8))
    if np.max(np.abs(dct2(plane) - dct2_naive(plane))) > tol:
        raise AssertionError("separable DCT disagrees with the naive oracle")
    big = rng.standard_normal((24, 24))
    basis = dct_basis(8)
    for name, impl in backends().items():
        blocks = impl.sliding_dct(np.ascontiguousarray(big), basis, 8, 4)
        ref = dct2_naive(big[8:16, 12:20])
        if np.max(np.abs(blocks[2, 3] - ref)) > tol:
            raise AssertionError(f"{name} sliding kernel disagrees with the oracle")


def _time(fn, runs: int):
    samples = np.empty(runs)
    for i in range(runs):
        start = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - start
    return float(samples.mean()), float(samples.std())


def run_bench(cfg) -> list:
    """Benchmark rows: one per (op, size, stride, backend) cell."""
    crosscheck()
    runs = cfg["bench_runs"]
    window = cfg["bench_window"]
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for size in cfg["bench_sizes"]:
        plane = rng.random((size, size))
        mean, std = _time(lambda p=plane: dct2(p), runs)
        rows.append({"op": "dct2", "size": size, "window": size, "stride": 0,
                     "backend": "separable", "runs": runs, "mean_s": mean, "std_s": std})
        if window > size:
            continue
        basis = dct_basis(window)
        contig = np.ascontiguousarray(plane)
        for stride in cfg["bench_strides"]:
            for name, impl in backends().items():
                mean, std = _time(
                    lambda i=impl, p=contig, s=stride: i.sliding_dct(p, basis, window, s),
                    runs,
                )
                rows.append({"op": "sliding_dct", "size": size, "window": window,
                             "stride": stride, "backend": name, "runs": runs,
                             "mean_s": mean, "std_s": std})
    return rows


def format_rows(rows) -> str:
    header = ["op", "size", "window", "stride", "backend", "runs", "mean_s", "std_s"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            f"{row[k]:.9f}" if k in ("mean_s", "std_s") else str(row[k]) for k in header
        ))
    return "\n".join(lines) + "\n"
