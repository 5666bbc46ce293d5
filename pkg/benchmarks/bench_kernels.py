"""Benchmark the compiled kernels against the pure numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 50] [--T 14246] [--repeats 3]
"""
import argparse
import time

import numpy as np


def time_call(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=50, help="stations")
    parser.add_argument("--T", type=int, default=14246, help="series length")
    parser.add_argument("--max-offset", type=int, default=365)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    from streamgov._kernels import _fallback
    try:
        from streamgov._kernels import _fast
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.uniform(0.0, 2.0, size=(args.n, args.T)))
    g = np.ascontiguousarray(rng.uniform(0.0, 2.0, size=args.T))

    cases = [
        ("offset_scan",
         lambda: _fast.offset_scan(x, g, args.max_offset, True),
         lambda: _fallback.offset_scan(x, g, args.max_offset, True)),
        ("pairwise_l1",
         lambda: _fast.pairwise_l1(x),
         lambda: _fallback.pairwise_l1(x)),
    ]

    print(f"n={args.n} T={args.T} max_offset={args.max_offset} "
          f"(best of {args.repeats})")
    print(f"{'kernel':<14} {'cython':>10} {'numpy':>10} {'speedup':>8}")
    for name, fast_fn, slow_fn in cases:
        a = np.asarray(fast_fn())
        b = np.asarray(slow_fn())
        assert np.allclose(a, b), f"{name}: backend results disagree"
        t_fast = time_call(fast_fn, repeats=args.repeats)
        t_slow = time_call(slow_fn, repeats=args.repeats)
        print(f"{name:<14} {t_fast:>9.3f}s {t_slow:>9.3f}s "
              f"{t_slow / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
