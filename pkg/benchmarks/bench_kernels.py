"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both flavours are called directly, so the GWLAGRANGE_DISABLE_NUMBA flag does
not matter here.  The first numba call of each kernel is made before timing so
compilation is excluded.
"""
import argparse
import time

import numpy as np

from gwlagrange import kernels
from gwlagrange.family import OffspringSpec
from gwlagrange.gw import OffspringTable


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(quick):
    N = 256 if quick else 1024
    p = OffspringSpec.exp().coefficients(N - 1) * np.exp(-1.0)
    a = np.random.default_rng(0).random(N)
    inner = np.concatenate([[0.0], a[1:] / N])
    cdf = OffspringTable.build(OffspringSpec.exp(), 2.0).cdf
    keys = kernels.tree_keys(1, 0, 2000 if quick else 10000)
    budget = 1000
    yield (f"conv_trunc N={N}", lambda f: f(a, a, N),
           kernels._conv_trunc_nb, kernels._conv_trunc_np)
    yield (f"lagrange_scaled N={N}", lambda f: f(p, N),
           kernels._lagrange_scaled_nb, kernels._lagrange_scaled_np)
    yield (f"compose N={N}", lambda f: f(a, inner, N),
           kernels._compose_nb, kernels._compose_np)

    def sim(f):
        m = len(keys)
        out = [np.empty(m, dtype=np.int64) for _ in range(3)]
        f(cdf, keys, budget, *out)

    yield f"simulate {len(keys)} trees t=2 budget={budget}", sim, kernels._simulate_nb, kernels._simulate_np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    print(f"{'kernel':<42} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name, call, fast, slow in cases(args.quick):
        call(fast)  # compile
        tf = best_of(lambda: call(fast), args.repeat)
        ts = best_of(lambda: call(slow), args.repeat)
        print(f"{name:<42} {tf:>10.4f} {ts:>10.4f} {ts / tf:>8.1f}")


if __name__ == "__main__":
    main()
