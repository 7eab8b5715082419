"""Time the compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Both backends are
imported directly, so the environment switch in ``plkdescent.kernels`` has no
effect here.
"""

import argparse
import timeit

import numpy as np

from plkdescent import _kernels_py

try:
    from plkdescent import _kernels
except ImportError:
    _kernels = None


def pow_residual_batch(mod, cases):
    for target, scale, power in cases:
        mod.solve_pow_residual(target, scale, power)


def cases_pow_residual(rng, n=2000):
    return list(zip(rng.uniform(1e-3, 10.0, n), rng.uniform(0.1, 5.0, n), rng.uniform(0.1, 3.0, n)))


def cases_pair_slope(rng, m=400, dim=2):
    X = rng.standard_normal((m, dim))
    return X, np.tanh(X) + 0.1 * X


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    pr = cases_pow_residual(rng)
    X, G = cases_pair_slope(rng)

    benches = {
        f"solve_pow_residual x{len(pr)}": lambda mod: (lambda: pow_residual_batch(mod, pr)),
        f"max_pair_slope m={X.shape[0]}": lambda mod: (lambda: mod.max_pair_slope(X, G)),
    }
    print(f"{'kernel':32s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s}")
    for name, make in benches.items():
        t_py = best_of(make(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:32s} {t_py:12.4f} {'n/a':>12s} {'n/a':>9s}")
            continue
        t_cy = best_of(make(_kernels), args.repeat)
        print(f"{name:32s} {t_py:12.4f} {t_cy:12.4f} {t_py / t_cy:8.1f}x")
    if _kernels is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
