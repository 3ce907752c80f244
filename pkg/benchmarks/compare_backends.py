"""Benchmark the compiled Polya-Gamma kernel against the pure-Python twin.

Verifies that both backends draw bitwise-identical values from the same seed
and times bulk sampling across a range of tilts.

Usage: python benchmarks/compare_backends.py [n_draws]
"""

import sys
import time

import numpy as np

from hawkes_vb import _pg_fallback

try:
    from hawkes_vb import _pg_core
except ImportError:
    _pg_core = None


def bench(fn, c, n, seed):
    rng = np.random.default_rng(seed)
    tilts = np.full(n, c)
    t0 = time.perf_counter()
    out = fn(tilts, rng)
    return time.perf_counter() - t0, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    print(f"{n} PG(1, c) draws per cell\n")
    header = f"{'c':>6} | {'python':>10} | {'cython':>10} | {'speedup':>8} | identical"
    print(header)
    print("-" * len(header))
    for c in (0.0, 0.5, 2.0, 10.0, 50.0):
        t_py, out_py = bench(_pg_fallback.pg_draw_arr, c, n, seed=123)
        if _pg_core is None:
            print(f"{c:6.1f} | {t_py:9.3f}s | {'absent':>10} | {'-':>8} | -")
            continue
        t_cy, out_cy = bench(_pg_core.pg_draw_arr, c, n, seed=123)
        same = bool(np.array_equal(out_py, out_cy))
        print(f"{c:6.1f} | {t_py:9.3f}s | {t_cy:9.3f}s | "
              f"{t_py / t_cy:7.1f}x | {same}")
    if _pg_core is None:
        print("\ncompiled backend not built; install with a C toolchain to compare")


if __name__ == "__main__":
    main()
