#!/usr/bin/env python3
"""Benchmark: compiled integration kernel vs pure-numpy fallback.

Runs the same closed-loop workload through both kernels and reports
steps/second and the speedup.  Usage:

    python benchmarks/bench_kernel.py [--p 30] [--t-final 200] [--h 0.01]
"""

import argparse
import time

import numpy as np

from blochensemble import _kernels_py
from blochensemble.core import random_ensemble
from blochensemble.dynamics import ControlLaw, _law_arrays

try:
    from blochensemble import _kernels
except ImportError:
    _kernels = None


def run_once(kernel, s0, law, h, n_steps, stride):
    law_code, cw, n_ctrl, rate, sign, ef, lw = _law_arrays(law, s0)
    p = s0.p
    X = np.array(s0.spins, dtype=float, order="C", copy=True)
    max_rec = n_steps // stride + 2
    times = np.empty(max_rec)
    states = np.empty((max_rec, p, 3))
    controls = np.empty((max_rec, 2))
    lyap = np.empty(max_rec)
    bufs = [np.empty((p, 3)) for _ in range(5)]
    t0 = time.perf_counter()
    kernel.run_loop(
        X, np.ascontiguousarray(ef), np.ascontiguousarray(cw), n_ctrl, law_code,
        rate, sign, 0, h, n_steps, stride,
        np.ascontiguousarray(lw), 0, 0.0,
        times, states, controls, lyap, *bufs,
    )
    return time.perf_counter() - t0


def bench(kernel, name, s0, law, h, n_steps, stride, repeats=3):
    best = min(run_once(kernel, s0, law, h, n_steps, stride) for _ in range(repeats))
    rate = n_steps / best
    print(f"  {name:10s} {best:8.3f} s   {rate:12.0f} steps/s")
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=30)
    ap.add_argument("--t-final", type=float, default=200.0)
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--stride", type=int, default=100)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    n_steps = int(round(args.t_final / args.h))
    s0 = random_ensemble(args.seed, args.p, (1.0, 4.0), (0.8, 1.0))
    law = ControlLaw.full_sum()
    print(
        f"workload: p={args.p}, {n_steps} RK4 steps (T={args.t_final}, h={args.h}), "
        f"stride={args.stride}"
    )

    t_py = bench(_kernels_py, "python", s0, law, args.h, n_steps, args.stride)
    if _kernels is None:
        print("  compiled   (extension not built: python setup.py build_ext --inplace)")
        return
    t_c = bench(_kernels, "compiled", s0, law, args.h, n_steps, args.stride)
    print(f"  speedup    {t_py / t_c:8.1f}x")


if __name__ == "__main__":
    main()
