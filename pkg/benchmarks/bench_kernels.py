"""Benchmark the compiled paraboloid projection against the NumPy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--sizes 1e4,1e5,1e6] [--repeats 5]

The kernel projects batches of (a, bx, by) triples onto the convex set
{(a, b) : a + |b|^2 / 4 <= 0}; it dominates the per-iteration cost of
the solver, so both backends are timed on identical inputs and checked
for agreement before speed is reported.
"""

import argparse
import time

import numpy as np

from otsource._kernels import COMPILED_AVAILABLE, compiled, reference


def sample_inputs(n, rng):
    """Mix of interior, boundary-ish and far-violating points."""
    a = rng.normal(0.0, 1.0, n)
    bx = rng.normal(0.0, 1.5, n)
    by = rng.normal(0.0, 1.5, n)
    # make roughly a third of the batch already feasible
    third = n // 3
    a[:third] = -0.25 * (bx[:third] ** 2 + by[:third] ** 2) - np.abs(
        rng.normal(0.0, 0.5, third)
    )
    return a, bx, by


def best_time(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def check_agreement(n, rng):
    a, bx, by = sample_inputs(n, rng)
    ra = reference.project_paraboloid(a, bx, by)
    ca = compiled.project_paraboloid(a, bx, by)
    worst = max(float(np.max(np.abs(r - c))) for r, c in zip(ra, ca))
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1e4,1e5,1e6",
                        help="comma-separated batch sizes")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats; the best run is reported")
    args = parser.parse_args()
    sizes = [int(float(s)) for s in args.sizes.split(",")]

    rng = np.random.default_rng(2024)
    if not COMPILED_AVAILABLE:
        print("compiled backend not available; timing the NumPy reference only")
        for n in sizes:
            data = sample_inputs(n, rng)
            t = best_time(reference.project_paraboloid, data, args.repeats)
            print(f"n={n:>9,d}  numpy {t * 1e3:8.2f} ms")
        return

    worst = check_agreement(10_000, rng)
    print(f"backend agreement on 10k mixed samples: max abs diff {worst:.3e}")
    assert worst < 1e-9, "backends disagree"

    header = f"{'batch':>9}  {'numpy':>12}  {'compiled':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        data = sample_inputs(n, rng)
        t_ref = best_time(reference.project_paraboloid, data, args.repeats)
        t_cmp = best_time(compiled.project_paraboloid, data, args.repeats)
        print(
            f"{n:>9,d}  {t_ref * 1e3:>9.2f} ms  {t_cmp * 1e3:>9.2f} ms"
            f"  {t_ref / t_cmp:>7.2f}x"
        )


if __name__ == "__main__":
    main()
