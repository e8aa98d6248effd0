"""Time the numba and pure-numpy paths of each hot kernel.

Usage: python3 benchmarks/bench_kernels.py [--repeat 50]

Sizes are the ones the default model and the baselines actually see: a
101-frame window with 64 channels and kernel 5 for the convolutions, and
11 knots x 30 coordinates for the spline. The first numba call (compilation)
is excluded from the timings.
"""

import argparse
import timeit

import numpy as np

from deciwatch._kernels import IMPLEMENTATIONS


def cases(rng):
    n, m = 11, 30
    sub, sup = rng.uniform(0.5, 1.0, n), rng.uniform(0.5, 1.0, n)
    diag = 4.0 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=(n, m))
    knots = np.arange(0.0, 101.0, 10.0)
    values = rng.normal(size=(n, m))
    m2 = rng.normal(size=(n, m))
    t = np.arange(101.0)
    x = rng.normal(size=(16, 101, 30))
    w = rng.normal(size=(5, 30, 64))
    g = rng.normal(size=(16, 101, 64))
    return {
        "solve_tridiagonal": (sub, diag, sup, rhs),
        "cubic_eval": (knots, values, m2, t),
        "conv1d": (x, w),
        "conv1d_grad_input": (g, w),
        "conv1d_grad_weight": (x, g, 5),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  max|diff|")
    for name, call_args in cases(rng).items():
        fast, slow = IMPLEMENTATIONS[name]
        a, b = fast(*call_args), slow(*call_args)  # also compiles
        t_fast = min(timeit.repeat(lambda: fast(*call_args), number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: slow(*call_args), number=1, repeat=args.repeat))
        print(f"{name:<20} {t_fast * 1e3:>10.4f} {t_slow * 1e3:>10.4f} "
              f"{t_slow / t_fast:>7.1f}x  {np.max(np.abs(a - b)):.1e}")


if __name__ == "__main__":
    main()
