#!/usr/bin/env python3
"""Time each hot kernel jitted and interpreted on the bundled arm.

    python3 benchmarks/bench_kernels.py --inner 2000

The interpreted column calls the exact same source through ``.py_func``,
so the table is a direct measure of what the JIT buys per call.  With
ARMTWIN_DISABLE_NUMBA=1 (or numba missing) both columns run the numpy
fallback and the speedup column reads 1.0 by construction.

Caveat: composite kernels (chain_jacobian, dls_ik) reach their inner
kernels through module-level names, which stay jitted even when the
outer call enters via ``.py_func``, so their interpreted figures are
flattering.  For a fully interpreted baseline, rerun the script with
ARMTWIN_DISABLE_NUMBA=1 and compare the jitted columns across runs.
"""

import argparse
import time

import numpy as np

from armtwin import kernels
from armtwin.model import bundled_model


def build_cases(ik_iterations):
    model = bundled_model()
    fix_r, fix_p, axes, ee_r, ee_p = model.chain_arrays
    eye = np.eye(3)
    zero = np.zeros(3)
    q = np.array([0.0, -0.4, 0.3, 0.0, 1.0, 0.0])

    rs, ps = kernels.chain_frames(fix_r, fix_p, axes, q + 0.05, eye, zero, ee_r, ee_p)
    target_r, target_p = rs[-1].copy(), ps[-1].copy()
    jac = kernels.chain_jacobian(fix_r, fix_p, axes, q, eye, zero, ee_r, ee_p)
    err = np.full(6, 1e-3)

    chain = (fix_r, fix_p, axes, q, eye, zero, ee_r, ee_p)
    ik = (
        fix_r, fix_p, axes,
        model.limits_lower, model.limits_upper,
        eye, zero, ee_r, ee_p,
        target_r, target_p,
        q, ik_iterations, 1e-3, 1e-4, 1e-3, 0.2,
    )
    return [
        ("chain_frames", kernels.chain_frames, chain),
        ("chain_jacobian", kernels.chain_jacobian, chain),
        ("gram_det", kernels.gram_det, (jac,)),
        ("dls_step", kernels.dls_step, (jac, err, 1e-3)),
        ("dls_ik", kernels.dls_ik, ik),
    ]


def best_per_call_us(fn, args, inner, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best * 1e6


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--inner", type=int, default=1000, help="calls per timing sample")
    parser.add_argument("--repeat", type=int, default=5, help="samples per kernel (best wins)")
    parser.add_argument("--ik-iterations", type=int, default=40)
    args = parser.parse_args()

    kernels.warmup()
    mode = "numba jit" if kernels.NUMBA_ENABLED else "numpy fallback (no jit available)"
    print(f"kernel mode: {mode}")
    print(f"{'kernel':<16} {'jitted us':>10} {'interpreted us':>15} {'speedup':>8}")
    for name, fn, call_args in build_cases(args.ik_iterations):
        inner = max(1, args.inner // 20) if name == "dls_ik" else args.inner
        jitted = best_per_call_us(fn, call_args, inner, args.repeat)
        plain = best_per_call_us(fn.py_func, call_args, max(1, inner // 10), args.repeat)
        print(f"{name:<16} {jitted:>10.2f} {plain:>15.2f} {plain / jitted:>7.1f}x")


if __name__ == "__main__":
    main()
