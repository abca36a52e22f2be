"""Compare the numba-compiled kernels against their pure-numpy/Python versions.

Usage: python benchmarks/bench_kernels.py [--cells 4096] [--steps 200] [--points 400]

Reports wall time per call for the finite-volume flux update (vectorized
numpy vs compiled loop) and for the affine batch classifier (interpreted vs
compiled), and checks that both paths give the same answer.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from coldchain import _affine_kernels as ak
from coldchain import _field_kernels as fk
from coldchain._accel import NUMBA_AVAILABLE, kernel_pair


def timeit(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_llf(cells, steps):
    rng = np.random.default_rng(1)
    u = np.vstack([0.1 * rng.standard_normal(cells), 1 + 0.1 * rng.random(cells),
                   0.2 + 0.1 * rng.random(cells), 0.3 + 0.1 * rng.random(cells)])
    _, loop = kernel_pair(fk._llf_loop)

    def drive(kernel):
        v = u
        for _ in range(steps):
            v = kernel(v, 1e-2, 1e-3, True)
        return v

    t_np = timeit(drive, fk.llf_numpy)
    print(f"llf update   numpy       {t_np / steps * 1e6:10.1f} us/step  ({cells} cells)")
    if loop is not None:
        drive(loop)  # compile
        t_nb = timeit(drive, loop)
        diff = np.max(np.abs(drive(loop) - drive(fk.llf_numpy)))
        print(f"llf update   numba loop  {t_nb / steps * 1e6:10.1f} us/step  "
              f"speedup {t_np / t_nb:5.1f}x  max diff {diff:.1e}")


def bench_classifier(points):
    rng = np.random.default_rng(2)
    a0 = rng.uniform(-1, 1, points)
    g10 = rng.uniform(-1, 1, points)
    par = np.full(points, 0.5)
    args = (a0, g10, par, ak.MODE_AGES, 40.0, 1e-10, 1e-12, 1e8)
    py, compiled = kernel_pair(ak._classify_batch_py)
    out_py = np.empty(points, dtype=np.int64)
    t_py = timeit(lambda: py(*args, out_py), repeat=1)
    print(f"classifier   python      {t_py / points * 1e3:10.3f} ms/point ({points} points)")
    if compiled is not None:
        out_nb = np.empty(points, dtype=np.int64)
        compiled(*args, out_nb)  # compile
        t_nb = timeit(lambda: compiled(*args, out_nb))
        agree = int(np.sum(out_nb == out_py))
        print(f"classifier   numba       {t_nb / points * 1e3:10.3f} ms/point "
              f"speedup {t_py / t_nb:5.1f}x  agreement {agree}/{points}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--points", type=int, default=400)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba not installed: timing the pure-numpy path only")
    bench_llf(args.cells, args.steps)
    bench_classifier(args.points)


if __name__ == "__main__":
    main()
