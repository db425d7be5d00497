"""Timing comparison of the jit kernels against the pure numpy fallback.

The backend is fixed at import time by JACOBILOG_NO_NUMBA, so a single
process cannot measure both.  Run without flags and the script times the
jit path, re-runs itself in a subprocess with the fallback forced, and
prints the merged table:

    python3 benchmarks/bench_kernels.py --n 65536 --reps 5
"""

import argparse
import json
import os
import subprocess
import sys
import time
import warnings


def battery(n, reps):
    from jacobilog import (EnsembleSpec, Seed, blocks, critical_indices,
                           evolve, linearize, sample, sturm_count)

    spec = EnsembleSpec(kind="gbe", beta=2.0)
    mat = sample(n, spec, Seed(1234))
    idx = critical_indices(n, 1.0, 4.0)
    tr = evolve(mat, 1.0)

    jobs = {
        "evolve": lambda: evolve(mat, 1.0),
        "sturm_count": lambda: sturm_count(mat, 0.3),
        "linearize": lambda: linearize(mat, idx),
        "blocks": lambda: blocks(tr, idx),
    }
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, fn in jobs.items():
            fn()  # first call pays any compile cost; do not time it
            best = float("inf")
            for _ in range(reps):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            out[name] = best
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=65536)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--emit-json", action="store_true",
                    help="print raw timings as JSON and exit (worker mode)")
    args = ap.parse_args()

    times = battery(args.n, args.reps)
    if args.emit_json:
        print(json.dumps(times))
        return

    from jacobilog._kernels import NUMBA_DISABLED
    if NUMBA_DISABLED:
        print("JACOBILOG_NO_NUMBA is set; only the fallback path is "
              "reachable from here.")
        for name, dt in times.items():
            print(f"{name:<14} {dt * 1e3:9.3f} ms")
        return

    env = dict(os.environ, JACOBILOG_NO_NUMBA="1")
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--n", str(args.n),
         "--reps", str(args.reps), "--emit-json"],
        env=env, capture_output=True, text=True, check=True)
    fallback = json.loads(proc.stdout.strip().split("\n")[-1])

    print(f"n = {args.n}, best of {args.reps} runs, compile cost excluded")
    print(f"{'kernel':<14} {'jit (ms)':>10} {'numpy (ms)':>12} {'speedup':>9}")
    for name in times:
        a, b = times[name], fallback[name]
        print(f"{name:<14} {a * 1e3:10.3f} {b * 1e3:12.3f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
