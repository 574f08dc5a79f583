#!/usr/bin/env python3
"""Timing comparison of the pure-Python and compiled cores.

Runs the same seeded workloads through both backends, checks that the
observables agree bit for bit, and prints per-op costs with the speedup
ratio.  Absolute numbers are hardware-informative only.
"""

import argparse
import time

from stochfp import backend
from stochfp.fpcore import BINARY32, BINARY64
from stochfp.kernels import KernelSpec, op_trials, run_repetitions
from stochfp.rng import RngStream
from stochfp.rounding import PerturbedOpContext, parse_mode


def time_harmonic(n, mode, fmt, seed, reps, choice):
    spec = KernelSpec("harmonic", parse_mode(mode), fmt, n=n)
    t0 = time.perf_counter_ns()
    out = run_repetitions(spec, reps, RngStream(seed), backend_choice=choice)
    dt = time.perf_counter_ns() - t0
    return dt / (2 * n * reps), out.values  # one div + one add per term


def time_op(op, mode, fmt, seed, trials, choice):
    ctx = PerturbedOpContext(parse_mode(mode), fmt, RngStream(seed, 0xB))
    t0 = time.perf_counter_ns()
    triple = op_trials(op, 1.0 / 3.0, 3.0, 0.1, ctx, trials,
                       backend_choice=choice)
    dt = time.perf_counter_ns() - t0
    return dt / trials, triple


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=100_000,
                    help="harmonic series length (default: %(default)s)")
    ap.add_argument("--reps", type=int, default=3,
                    help="harmonic repetitions per backend (default: %(default)s)")
    ap.add_argument("--trials", type=int, default=200_000,
                    help="scalar-op trials per backend (default: %(default)s)")
    args = ap.parse_args(argv)

    have_compiled = backend.core() is not None
    backends = ["pure"] + (["compiled"] if have_compiled else [])
    print(f"active default backend: {backend.active_backend()}")
    if not have_compiled:
        print("compiled core not built; timing the pure backend only")
    print()

    rows = []
    for mode, fmt in (("sr", BINARY32), ("ud", BINARY32),
                      ("mca@24", BINARY32), ("sr", BINARY64)):
        label = f"harmonic n={args.n} {mode} {fmt.name}"
        per, vals = {}, {}
        for ch in backends:
            per[ch], vals[ch] = time_harmonic(
                args.n, mode, fmt, args.seed, args.reps, ch)
        if have_compiled and vals["pure"] != vals["compiled"]:
            raise SystemExit(f"backend observable mismatch on {label}")
        rows.append((label, per))

    for op, mode in (("add", "sr"), ("add", "ud"), ("div", "sr"), ("fma", "sr")):
        label = f"scalar {op} {mode} binary32 x{args.trials}"
        per, vals = {}, {}
        for ch in backends:
            per[ch], vals[ch] = time_op(op, mode, BINARY32, args.seed,
                                        args.trials, ch)
        if have_compiled and vals["pure"] != vals["compiled"]:
            raise SystemExit(f"backend observable mismatch on {label}")
        rows.append((label, per))

    width = max(len(label) for label, _ in rows)
    header = f"{'workload':<{width}}  {'pure ns/op':>12}"
    if have_compiled:
        header += f"  {'compiled ns/op':>15}  {'speedup':>8}"
    print(header)
    for label, per in rows:
        line = f"{label:<{width}}  {per['pure']:>12.1f}"
        if have_compiled:
            line += (f"  {per['compiled']:>15.1f}"
                     f"  {per['pure'] / per['compiled']:>7.1f}x")
        print(line)
    print("\nall timed observables agreed bitwise across backends"
          if have_compiled else "")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
