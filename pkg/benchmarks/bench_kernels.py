#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy reference.

Covers the two hot paths: sequential trajectory stepping (run_flow) and
Monte Carlo ensemble stepping (evolve_batch).  Both backends implement the
same truncation, so final states are compared as a sanity check.

Usage: python benchmarks/bench_kernels.py [--steps 2000] [--batch 20000]
"""

import argparse
import time

import numpy as np

from gbbmlab._kernels import _reference

try:
    from gbbmlab._kernels import _fastcore
except ImportError:
    _fastcore = None


def state(seed, n):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return c / (np.sqrt(2.0) * np.arange(1, n + 1) ** 2.0)


def omega(gamma, n):
    k = np.arange(1, n + 1, dtype=float)
    return k / (1.0 + k ** gamma)


def time_call(fn, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_run_flow(steps):
    print(f"\nrun_flow: single trajectory, {steps} RK4 steps, dt=1e-3")
    print(f"{'N':>6} {'python':>12} {'compiled':>12} {'speedup':>9} {'max diff':>11}")
    for n in (4, 16, 64, 128):
        u0 = state(1, n)
        om = omega(2.0, n)
        w = np.ones(n)
        args = (u0, om, w, w, 1e-3, steps, steps)
        t_ref, ref = time_call(lambda: _reference.run_flow(*args))
        if _fastcore is None:
            print(f"{n:>6} {t_ref * 1e3:>10.1f}ms {'n/a':>12}")
            continue
        t_fast, fast = time_call(lambda: _fastcore.run_flow(*args))
        diff = np.max(np.abs(ref[0][-1] - fast[0][-1]))
        print(f"{n:>6} {t_ref * 1e3:>10.1f}ms {t_fast * 1e3:>10.1f}ms "
              f"{t_ref / t_fast:>8.1f}x {diff:>11.2e}")


def bench_evolve_batch(batch):
    print(f"\nevolve_batch: {batch} ensemble members, 50 RK4 steps, dt=1e-2")
    print(f"{'N':>6} {'python':>12} {'compiled':>12} {'speedup':>9} {'max diff':>11}")
    for n in (4, 8, 16):
        rng = np.random.default_rng(2)
        U = (rng.standard_normal((batch, n)) + 1j * rng.standard_normal((batch, n)))
        U /= np.sqrt(2.0) * np.arange(1, n + 1) ** 2.0
        om = omega(2.0, n)
        t_ref, ref = time_call(lambda: _reference.evolve_batch(U, om, 1e-2, 50), repeat=2)
        if _fastcore is None:
            print(f"{n:>6} {t_ref * 1e3:>10.1f}ms {'n/a':>12}")
            continue
        t_fast, fast = time_call(lambda: _fastcore.evolve_batch(U, om, 1e-2, 50), repeat=2)
        diff = np.max(np.abs(ref - fast))
        print(f"{n:>6} {t_ref * 1e3:>10.1f}ms {t_fast * 1e3:>10.1f}ms "
              f"{t_ref / t_fast:>8.1f}x {diff:>11.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--batch", type=int, default=20000)
    args = ap.parse_args()
    print("compiled kernels:", "available" if _fastcore is not None else "NOT BUILT")
    bench_run_flow(args.steps)
    bench_evolve_batch(args.batch)


if __name__ == "__main__":
    main()
