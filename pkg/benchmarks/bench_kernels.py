#!/usr/bin/env python3
"""Benchmark the numba kernels against the numpy/scipy fallback lane.

Run with the default environment so the numba lane is importable:

    python3 benchmarks/bench_kernels.py

(Setting WICKHEAT_NUMBA=0 switches the whole package to the fallback lane;
this script instead times both implementations side by side.)
"""

import time

import numpy as np

from wickheat import _kernels


def timeit(fn, *args, repeat=5):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_cn_solve():
    print("Crank-Nicolson stepper (one chaos-coefficient solve)")
    print(f"{'grid':>16} {'numpy/scipy':>12} {'numba':>12} {'speedup':>8}   max|diff|")
    rng = np.random.default_rng(0)
    for nx, nt in [(201, 101), (401, 201), (801, 401), (1601, 801)]:
        dx = 20.0 / (nx - 1)
        dt = 0.5 / (nt - 1)
        q = rng.normal(size=nx)
        f = rng.normal(size=(nt, nx))
        g = rng.normal(size=nx)
        t_np, u_np = timeit(_kernels._cn_solve_numpy, g, f, q, dx, dt)
        if not _kernels.USING_NUMBA:
            print(f"{nx}x{nt:>9} {t_np * 1e3:>10.2f}ms {'n/a':>12}")
            continue
        _kernels.cn_solve(g, f, q, dx, dt)  # warm the JIT
        t_nb, u_nb = timeit(_kernels.cn_solve, g, f, q, dx, dt)
        diff = float(np.max(np.abs(u_np - u_nb)))
        print(
            f"{nx}x{nt:>9} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms "
            f"{t_np / t_nb:>7.1f}x   {diff:.1e}"
        )


def bench_wick_accumulate():
    print("\nWick convolution accumulate (per output coefficient)")
    print(f"{'shape':>16} {'pairs':>6} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    rng = np.random.default_rng(1)
    for ncoef, nt, nx, npairs in [(15, 201, 401, 64), (28, 201, 401, 256), (45, 401, 801, 512)]:
        left = rng.normal(size=(ncoef, nt, nx))
        right = rng.normal(size=(ncoef, nt, nx))
        pairs = [
            (int(rng.integers(0, ncoef)), int(rng.integers(0, ncoef)))
            for _ in range(npairs)
        ]
        out1 = np.zeros((nt, nx))
        t_np, _ = timeit(_kernels._accumulate_products_numpy, left, right, pairs, out1)
        if not _kernels.USING_NUMBA:
            print(f"{nt}x{nx:>9} {npairs:>6} {t_np * 1e3:>10.2f}ms {'n/a':>12}")
            continue
        out2 = np.zeros((nt, nx))
        _kernels.accumulate_products(left, right, pairs, out2)  # warm the JIT
        out2[:] = 0.0
        t_nb, _ = timeit(_kernels.accumulate_products, left, right, pairs, out2)
        print(
            f"{nt}x{nx:>9} {npairs:>6} {t_np * 1e3:>10.2f}ms {t_nb * 1e3:>10.2f}ms "
            f"{t_np / t_nb:>7.1f}x"
        )


def bench_end_to_end():
    print("\nend-to-end: worked-example propagation (K=4, P=2, one eps)")
    from wickheat.grids import GridSpec
    from wickheat.harness import Section6Preset, build_section6_problem
    from wickheat.multiindex import enumerate_truncation
    from wickheat.propagator import propagate
    from wickheat.regularize import MollifierSpec, regularize_potential
    from wickheat.vws import ProblemData

    preset = Section6Preset()
    grid = GridSpec(-10.0, 10.0, 401, preset.T, 201)
    trunc = enumerate_truncation(4, 2)
    built = build_section6_problem(preset, grid, trunc)
    data = ProblemData(
        op=built["operator"], grid=grid, F=built["F"], G=built["G"],
        truncation=trunc, p_F=1, p_G=2,
    )
    qe = regularize_potential(
        built["potential"], MollifierSpec(scaling="log"), 0.1, grid, trunc
    )
    spec = data.with_potential(qe)
    propagate(spec)  # warm
    t, _ = timeit(lambda: propagate(spec), repeat=3)
    lane = "numba" if _kernels.USING_NUMBA else "numpy"
    print(f"  {len(trunc)} coefficient solves on {grid.nx}x{grid.nt}: "
          f"{t * 1e3:.1f} ms  (lane: {lane})")


if __name__ == "__main__":
    lane = "numba" if _kernels.USING_NUMBA else "numpy/scipy fallback"
    print(f"active kernel lane: {lane}\n")
    bench_cn_solve()
    bench_wick_accumulate()
    bench_end_to_end()
