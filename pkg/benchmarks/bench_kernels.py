#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy/LAPACK fallback.

Run from the repository root after building the extension:

    python benchmarks/bench_kernels.py [--repeat 3]

The merge kernel dominates real workloads (parameter sweeps call it
hundreds of times, near-threshold runs push the photon-number cutoff
into the thousands), so that is where the comparison matters most.
"""

import argparse
import time

import numpy as np

from gaussify._kernels import _fallback

try:
    from gaussify._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def merge_inputs(n_max, eta):
    rng = np.random.default_rng(42)
    p = rng.random(n_max + 1) + 1e-6
    p /= p.sum()
    povm = (1.0 - eta) ** np.arange(2 * n_max + 1, dtype=float)
    return p, povm


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    cases = []
    for n_max in (64, 256, 512, 1024):
        p, povm = merge_inputs(n_max, 0.4)
        cases.append(("merge non-click  n_max=%4d" % n_max,
                      lambda p=p, povm=povm: _fallback.merge_fock(p, povm),
                      lambda p=p, povm=povm: _core.merge_fock(p, povm) if _core else None))
    for n_max in (32, 96):
        p, _ = merge_inputs(n_max, 0.0)
        povm = np.ones(2 * n_max + 1)
        cases.append(("merge identity   n_max=%4d" % n_max,
                      lambda p=p, povm=povm: _fallback.merge_fock(p, povm),
                      lambda p=p, povm=povm: _core.merge_fock(p, povm) if _core else None))
    for S in (100, 300):
        cases.append(("full blocks to S=%3d" % S,
                      lambda S=S: [_fallback.bs_block(s) for s in range(S + 1)],
                      lambda S=S: [_core.bs_block(s) for s in range(S + 1)] if _core else None))
    probs = merge_inputs(400, 0.4)[0]
    grid = np.linspace(-40, 40, 16384)
    cases.append(("quadrature pdf   n_max= 400 x 16384",
                  lambda: _fallback.pdf_values(probs, grid),
                  lambda: _core.pdf_values(probs, grid) if _core else None))

    print("%-38s %12s %12s %9s" % ("kernel", "numpy [s]", "compiled [s]", "speedup"))
    for label, fb, cc in cases:
        t_fb = timeit(fb, args.repeat)
        if _core is None:
            print("%-38s %12.4f %12s %9s" % (label, t_fb, "n/a", "n/a"))
            continue
        t_cc = timeit(cc, args.repeat)
        print("%-38s %12.4f %12.4f %8.1fx" % (label, t_fb, t_cc, t_fb / t_cc))
    if _core is None:
        print("\ncompiled kernels not built; showing fallback timings only")


if __name__ == "__main__":
    main()
