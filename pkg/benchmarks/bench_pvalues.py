"""Time the compiled p-value kernel against the numpy fallback.

    python3 benchmarks/bench_pvalues.py --n 5000 20000 --dimension 10
"""
import argparse
import time

import numpy as np

from isoturn import Dataset, evidence_table, odds_threshold
from isoturn._backend import KERNELS
from isoturn.evidence import log_terms


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[5000, 20000], help="sample sizes")
    parser.add_argument("--dimension", type=int, default=10, help="number of binary coordinates")
    parser.add_argument("--repeat", type=int, default=3, help="timing repeats (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    tau = odds_threshold(2, 0.094)
    d = args.dimension
    rng = np.random.default_rng(args.seed)
    nodes = [format(v, f"0{d}b") for v in range(1 << d)]
    kernels = sorted(KERNELS)
    print(f"kernels available: {', '.join(kernels)}")
    print(f"{'task':<34}" + "".join(f"{k:>12}" for k in kernels) + f"{'speedup':>10}")

    for n in args.n:
        data = Dataset(rng.integers(0, 1 << d, n), (rng.random(n) < 0.12).astype(np.uint8), d)
        t = {k: best_of(lambda: evidence_table(nodes, data, tau, kernel=k), args.repeat) for k in kernels}
        _row(f"sweep: {len(nodes)} centres, n={n}", t)

    k = np.repeat(np.arange(1, 301), np.arange(2, 302))
    s = np.concatenate([np.arange(0, j + 1) for j in range(1, 301)])
    t = {name: best_of(lambda: log_terms(k, s, tau, name), args.repeat) for name in kernels}
    _row(f"log terms: {k.size} (k, s) pairs", t)


def _row(label, t):
    speed = t["python"] / t["compiled"] if "compiled" in t else float("nan")
    print(f"{label:<34}" + "".join(f"{v:>11.3f}s" for v in t.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
