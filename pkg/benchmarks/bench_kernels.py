"""Compare the compiled and pure-Python constitutive backends.

Times the Backward Euler return map plus tangent on a batch of random
plastic points, then a short grid run with each backend, and checks that
both backends give the same answer.

    python benchmarks/bench_kernels.py [--points 10201] [--grid 51] [--steps 10]
"""
import argparse
import time

import numpy as np

from vpfft import driver as D
from vpfft import kernels
from vpfft import microstructure as MS
from vpfft import verify as V


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_points(n, repeat):
    params, state, eps, _ = V.random_states(n, seed=11)
    dt = 0.05
    rows = {}
    for backend in kernels.available_backends():
        t, (res, C) = best_of(lambda: kernels.constitutive_update(params, state, eps, dt, backend=backend), repeat)
        rows[backend] = (t, res.sigma, C)
    return rows


def bench_grid(n, steps, repeat):
    grid = MS.synth_inclusion(n, n, 0.17)
    rows = {}
    for backend in kernels.available_backends():
        cfg = D.RunConfig(D.preset_catalog("hardening"), D.preset_load("hardening", steps),
                          grid=grid, backend=backend)
        t, rep = best_of(lambda: D.run(cfg, "improved"), repeat)
        rows[backend] = (t, rep.fields.sigma, rep.total_nr_iters)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=101 * 101)
    ap.add_argument("--grid", type=int, default=51)
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    print(f"backends available: {', '.join(kernels.available_backends())} (default {kernels.BACKEND})")
    pts = bench_points(args.points, args.repeat)
    print(f"\nreturn map + tangent, {args.points} points (best of {args.repeat})")
    for name, (t, _, _) in pts.items():
        print(f"  {name:9s} {1e3 * t:8.2f} ms")
    if len(pts) == 2:
        (tc, sc, Cc), (tp, sp, Cp) = pts["compiled"], pts["python"]
        print(f"  speed-up {tp / tc:.1f}x; max |dsigma|/|sigma| {np.abs(sc - sp).max() / np.abs(sp).max():.1e}, "
              f"max |dC|/|C| {np.abs(Cc - Cp).max() / np.abs(Cp).max():.1e}")

    grid = bench_grid(args.grid, args.steps, max(1, args.repeat // 2))
    print(f"\ngrid run {args.grid}x{args.grid}, {args.steps} increments, improved guess")
    for name, (t, _, its) in grid.items():
        print(f"  {name:9s} {t:8.2f} s  ({its} NR iterations)")
    if len(grid) == 2:
        (tc, sc, _), (tp, sp, _) = grid["compiled"], grid["python"]
        print(f"  speed-up {tp / tc:.2f}x; max stress difference {np.abs(sc - sp).max():.2e} Pa")


if __name__ == "__main__":
    main()
