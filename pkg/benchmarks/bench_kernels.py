"""Time the compiled and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json]

Each row reports the best-of-N wall time per call and whether the two
backends returned bit-identical results.
"""
import argparse
import json
import timeit

import numpy as np

from coreprune import kernels


def cases(rng):
    n, m, k = 4096, 20000, 16
    p = rng.random(n)
    p /= p.sum()
    cdf = np.cumsum(p)
    u = rng.random(m)
    draws = np.searchsorted(cdf, u, side="right").clip(max=n - 1)
    w = rng.normal(size=(k, n))
    x = rng.normal(size=(16, 28, 28))
    ker = rng.normal(size=(32, 16, 3, 3))
    return {
        f"draw_indices n={n} m={m}": lambda impl: kernels.draw_indices(cdf, u, n - 1, impl),
        f"accumulate n={n} m={m} k={k}": lambda impl: kernels.accumulate(draws, n, w, p, m, impl),
        "correlate2d 16x28x28 * 32x16x3x3": lambda impl: kernels.correlate2d(x, ker, (1, 1), impl),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the numpy backend is available")
    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        results = {}
        for label, impl in impls.items():
            results[label] = fn(impl)
            t = timeit.Timer(lambda: fn(impl))
            number, _ = t.autorange()
            row[label] = min(t.repeat(args.repeat, number)) / number
        if len(results) == 2:
            row["speedup"] = row["python"] / row["cython"]
            row["identical"] = same(results["python"], results["cython"])
        rows.append(row)

    if args.json:
        print(json.dumps(rows, indent=2))
        return
    for r in rows:
        line = f"{r['kernel']:<36} python {r['python'] * 1e3:9.3f} ms"
        if "cython" in r:
            line += (f"  cython {r['cython'] * 1e3:9.3f} ms  x{r['speedup']:.1f}"
                     f"  identical={r['identical']}")
        print(line)


if __name__ == "__main__":
    main()
