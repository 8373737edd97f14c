#!/usr/bin/env python3
"""Benchmark the compiled block-circulant kernels against the NumPy fallback.

The block-circulant matvec dominates solver runtime (it is the A-product of
every objective/gradient/Hessian evaluation), which is why it has a compiled
core. Run after an editable install:

    python benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

from bcopt import kernels
from bcopt.circulant import BlockCirculantOp
from bcopt.ct import PolarGrid, make_projector


def time_call(fn, arg, repeats):
    fn(arg)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(arg)
        best = min(best, time.perf_counter() - t0)
    return best


def random_case(rng, n_b, s, density):
    blocks = []
    for _ in range(n_b):
        mask = rng.random((s, s)) < density
        blocks.append(rng.standard_normal((s, s)) * mask)
    return blocks


def bench_case(name, blocks, repeats):
    ops = {}
    for backend in ("python", "cython"):
        try:
            ops[backend] = BlockCirculantOp(blocks, backend=backend)
        except RuntimeError:
            print(f"{name}: compiled kernels unavailable, skipping comparison")
            return
    a_py, a_cy = ops["python"], ops["cython"]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(a_py.ncols)
    y = rng.standard_normal(a_py.nrows)
    assert np.allclose(a_py.apply(x), a_cy.apply(x), atol=1e-10)
    assert np.allclose(a_py.adjoint_apply(y), a_cy.adjoint_apply(y), atol=1e-10)
    t_py_mv = time_call(a_py.apply, x, repeats)
    t_cy_mv = time_call(a_cy.apply, x, repeats)
    t_py_rmv = time_call(a_py.adjoint_apply, y, repeats)
    t_cy_rmv = time_call(a_cy.adjoint_apply, y, repeats)
    print(f"{name:34s} matvec  python {1e3 * t_py_mv:8.3f} ms   "
          f"cython {1e3 * t_cy_mv:8.3f} ms   speedup {t_py_mv / t_cy_mv:5.1f}x")
    print(f"{'':34s} rmatvec python {1e3 * t_py_rmv:8.3f} ms   "
          f"cython {1e3 * t_cy_rmv:8.3f} ms   speedup {t_py_rmv / t_cy_rmv:5.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    rng = np.random.default_rng(42)

    bench_case("random n_b=64 s=32 density=0.1",
               random_case(rng, 64, 32, 0.1), args.repeats)
    bench_case("random n_b=128 s=64 density=0.05",
               random_case(rng, 128, 64, 0.05), args.repeats)

    grid = PolarGrid(32, 64, r_max=3.5)
    proj = make_projector(grid, 48)
    bench_case("CT projector 32x64 grid, 48 det", [b for b in proj.blocks],
               args.repeats)
    grid_big = PolarGrid(64, 128, r_max=7.0)
    proj_big = make_projector(grid_big, 96)
    bench_case("CT projector 64x128 grid, 96 det", [b for b in proj_big.blocks],
               args.repeats)


if __name__ == "__main__":
    main()
