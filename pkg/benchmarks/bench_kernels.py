"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from memexplorer import kernels


def _cases(rng):
    n = 20_000
    arrivals = np.sort(rng.uniform(0, 1e-3, n))
    sizes = np.full(n, 1 << 20, dtype=np.float64)
    k = 40
    f1 = np.sort(rng.uniform(0, 1, k))
    f2 = np.sort(rng.uniform(0, 1, k))[::-1].copy()
    m = 2048
    mu1, mu2 = rng.uniform(0, 1, m), rng.uniform(0, 1, m)
    s1, s2 = rng.uniform(0.01, 0.3, m), rng.uniform(0.01, 0.3, m)
    return {
        "serve_boundary (20k chunks)": lambda impl: impl.serve_boundary(arrivals, sizes, 0.0, 1e12),
        "ehvi_2d (2048 cands, 40 pts)": lambda impl: impl.ehvi_2d(mu1, s1, mu2, s2, f1, f2, 1.0, 1.0),
        "hypervolume_2d (40 pts)": lambda impl: impl.hypervolume_2d(f1, f2, 1.0, 1.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.backends()
    cases = _cases(np.random.default_rng(0))
    names = sorted(backends)
    print(f"{'kernel':32s}" + "".join(f"{n:>14s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases.items():
        best = {}
        for name in names:
            impl = backends[name]
            t = timeit.Timer(lambda: fn(impl))
            loops, _ = t.autorange()
            best[name] = min(t.repeat(args.repeat, loops)) / loops
        row = f"{label:32s}" + "".join(f"{best[n] * 1e3:11.3f} ms" for n in names)
        if "cython" in best:
            row += f"  {best['python'] / best['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
