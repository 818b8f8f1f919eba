"""Time the compiled kernels against the pure-Python ones on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from jfcs import _pykernels as py

try:
    from jfcs import _ckernels as cy
except ImportError:
    cy = None


def cases(rng):
    k = 12
    a = rng.uniform(1e8, 1e9, k)
    b = rng.uniform(1e-3, 1.0, k)
    pmin = np.zeros(k)
    yield "waterfill_bisect (K=12)", lambda m: m.waterfill_bisect(a, b, pmin, 20.0, 1e-9)

    n = 48
    y = rng.normal(0, 1, n)
    group = np.repeat(np.arange(8), 6).astype(np.intp)
    caps = np.ones(8)
    yield "project_groups (48 links)", lambda m: m.project_groups(y, group, caps)

    nu = rng.uniform(1e2, 1e5, n)
    G = rng.uniform(0, 1e2, (n, n))
    np.fill_diagonal(G, 0)
    w = rng.uniform(0.1, 1, n)
    x0 = np.full(n, 1 / 6)
    vbar, zbar = nu * x0, 1 + G @ x0
    rbar = np.full(n, -np.inf)
    yield "pg_ascent (48 links, 200 steps)", lambda m: m.pg_ascent(x0, nu, G, w, vbar, zbar, rbar, group,
                                                                   caps, 1.0, 200, 1e-12)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':34} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for name, fn in cases(rng):
        n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(py), number=1), 1e-6)))
        t_py = min(timeit.repeat(lambda: fn(py), number=n, repeat=args.repeat)) / n
        if cy is None:
            print(f"{name:34} {1e3 * t_py:12.4f} {'-':>12} {'-':>8}")
            continue
        m = max(1, int(0.2 / max(timeit.timeit(lambda: fn(cy), number=1), 1e-7)))
        t_cy = min(timeit.repeat(lambda: fn(cy), number=m, repeat=args.repeat)) / m
        print(f"{name:34} {1e3 * t_py:12.4f} {1e3 * t_cy:12.4f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
