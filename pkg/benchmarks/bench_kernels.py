"""Benchmark the compiled split kernel against the pure-NumPy fallback.

Forest training spends nearly all its time in the best-split search, so this
times full `fit_forest` calls on the realistic workload: 20-statistic feature
vectors of the default synthetic corpus. Swap backends with the same data and
seeds; the fitted models are identical bit-for-bit (verified here too).

Run:  python benchmarks/bench_kernels.py [--trees 100] [--repeats 3]
"""

import argparse
import time

import numpy as np

import emgdeck._kernels as kernels
from emgdeck import dsp
from emgdeck.forest import ForestConfig, fit_forest, forest_to_json
from emgdeck.synth import SynthConfig, generate_synthetic


def time_backend(name: str, X, y, cfg, repeats: int):
    kernels.best_split = kernels.get_backend(name).best_split
    best = float("inf")
    doc = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        forest = fit_forest(X, y, cfg)
        best = min(best, time.perf_counter() - t0)
        doc = forest_to_json(forest)
    return best, doc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--depth", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    print("generating default corpus + stats features ...")
    ds, _ = generate_synthetic(SynthConfig(seed=args.seed))
    X = dsp.stats_matrix(ds)
    y = [u.word for u in ds.utterances]
    cfg = ForestConfig(n_trees=args.trees, max_depth=args.depth, seed=args.seed)
    print(f"workload: fit_forest on {X.shape[0]} x {X.shape[1]} features, "
          f"{args.trees} trees, depth {args.depth}\n")

    results = {}
    docs = {}
    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled kernel not built; benchmarking the fallback only")
    for name in backends:
        results[name], docs[name] = time_backend(name, X, y, cfg, args.repeats)
        print(f"{name:>7}: {results[name]:8.3f} s  (best of {args.repeats})")

    if len(backends) == 2:
        speedup = results["python"] / results["cython"]
        identical = docs["python"] == docs["cython"]
        print(f"\nspeedup: {speedup:.1f}x   models identical: {identical}")
        if not identical:
            raise SystemExit("backends diverged; parity is broken")


if __name__ == "__main__":
    main()
