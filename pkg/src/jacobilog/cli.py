"""Command line front end.

Subcommands map onto the library one to one: ``clt`` runs the Monte
Carlo harness, ``trace`` emits one replica's per-step trace, ``esd``
checks the spectral distribution of a single sample, ``blocks`` runs the
oscillatory block machinery (or just prints the deterministic schedule
with --dry-run), and ``concentration`` evaluates the concentration
function of a sample file.

Exit codes: 0 on success, 2 for configuration errors (argparse's own
convention, kept for post-parse validation too), 3 for runtime failures.
All outputs are UTF-8 with LF line endings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import charpoly, oscillatory, scalar_regime, stats
from .charpoly import DEFAULT_KAPPA
from .ensemble import EnsembleSpec, Seed, sample
from .errors import JacobilogError

THREADS_ENV = "JACOBILOG_THREADS"


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV, "")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_ensemble_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=["gbe", "general"], default="gbe",
                   help="ensemble family (default gbe)")
    p.add_argument("--beta", type=float, default=2.0,
                   help="inverse temperature for gbe (default 2)")
    p.add_argument("--v", type=float, default=1.0,
                   help="noise variance for the general ensemble")
    p.add_argument("--b-law", default="gaussian",
                   help="diagonal noise law for the general ensemble")
    p.add_argument("--g-law", default="gaussian",
                   help="off-diagonal noise law for the general ensemble")
    p.add_argument("--c-rule", default="gbe",
                   help="c_k rule for the general ensemble (gbe or zero)")


def _build_spec(args) -> EnsembleSpec:
    if args.kind == "gbe":
        return EnsembleSpec(kind="gbe", beta=args.beta)
    return EnsembleSpec(kind="general", v=args.v, b_law=args.b_law,
                        g_law=args.g_law, c_rule=args.c_rule)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jacobilog",
        description="Simulation toolkit for log-determinant statistics of "
                    "random Jacobi matrices.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clt", help="Monte Carlo run of the w statistic")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int, required=True, help="matrix size")
    p.add_argument("--z", type=float, required=True, help="spectral point in (-2,2), nonzero")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--tau", type=float, default=1.0 / 3.0,
                   help="block schedule exponent (blocks diagnostics)")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="scalar window parameter (scalar diagnostics)")
    p.add_argument("--samples", type=int, required=True, help="replica count N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diagnostics", default="",
                   help="comma separated subset of scalar,transition,blocks")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or cpu count)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("trace", help="per-step trace of a single replica")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--scalar-out", default=None,
                   help="also write the linearized scalar-regime CSV here")
    p.add_argument("--blocks-out", default=None,
                   help="also write the oscillatory block CSV here")
    p.add_argument("--tau", type=float, default=1.0 / 3.0)

    p = sub.add_parser("esd", help="empirical spectral distribution of one sample")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-points", type=int, default=stats.ESD_GRID_POINTS)
    p.add_argument("--grid-lo", type=float, default=stats.ESD_GRID_LO)
    p.add_argument("--grid-hi", type=float, default=stats.ESD_GRID_HI)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)

    p = sub.add_parser("blocks", help="oscillatory block trace of one replica")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.add_argument("--tau", type=float, default=1.0 / 3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dry-run", action="store_true",
                   help="print the deterministic schedule, no sampling")
    p.add_argument("--out", default=None)

    p = sub.add_parser("concentration",
                       help="concentration function of a sample file")
    p.add_argument("--in", dest="infile", required=True,
                   help="text file, one value per line")
    p.add_argument("--eps", type=float, required=True, help="window radius")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    return ap


def _validate(args) -> list[str]:
    problems = []
    n = getattr(args, "n", None)
    if n is not None and n < 2:
        problems.append(f"--n must be >= 2, got {n}")
    z = getattr(args, "z", None)
    if z is not None and not (0.0 < abs(z) < 2.0):
        problems.append(f"--z must satisfy 0 < |z| < 2, got {z}")
    kappa = getattr(args, "kappa", None)
    if kappa is not None and kappa <= 0:
        problems.append(f"--kappa must be positive, got {kappa}")
    tau = getattr(args, "tau", None)
    if tau is not None and not (0.25 < tau < 0.4):
        problems.append(f"--tau must lie in (0.25, 0.4), got {tau}")
    epsilon = getattr(args, "epsilon", None)
    if epsilon is not None and not (0.0 < epsilon < 1.0):
        problems.append(f"--epsilon must lie in (0, 1), got {epsilon}")
    samples = getattr(args, "samples", None)
    if samples is not None and samples < 2:
        problems.append(f"--samples must be >= 2, got {samples}")
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        problems.append(f"--threads must be >= 1, got {threads}")
    eps = getattr(args, "eps", None)
    if eps is not None and eps <= 0:
        problems.append(f"--eps must be positive, got {eps}")
    gp = getattr(args, "grid_points", None)
    if gp is not None and gp < 2:
        problems.append(f"--grid-points must be >= 2, got {gp}")
    lo = getattr(args, "grid_lo", None)
    hi = getattr(args, "grid_hi", None)
    if lo is not None and hi is not None and lo >= hi:
        problems.append(f"--grid-lo must be below --grid-hi, got {lo} >= {hi}")
    if getattr(args, "kind", "gbe") == "gbe":
        beta = getattr(args, "beta", 2.0)
        if beta <= 0:
            problems.append(f"--beta must be positive, got {beta}")
    else:
        vv = getattr(args, "v", 1.0)
        if vv <= 0:
            problems.append(f"--v must be positive, got {vv}")
    diag = getattr(args, "diagnostics", "")
    if diag:
        names = {s.strip() for s in diag.split(",") if s.strip()}
        bad = names - {"scalar", "transition", "blocks"}
        if bad:
            problems.append(
                f"--diagnostics must be drawn from scalar,transition,blocks; got {sorted(bad)}")
    return problems


def cmd_clt(args) -> int:
    spec = _build_spec(args)
    diag = tuple(s.strip() for s in args.diagnostics.split(",") if s.strip())
    threads = args.threads if args.threads is not None else _default_threads()
    report = stats.mc_clt(spec, args.n, args.z, args.kappa, args.samples,
                          Seed(args.seed), diagnostics=diag, threads=threads,
                          epsilon=args.epsilon, tau=args.tau)
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write_text(args.out, text)
    return 0


def cmd_trace(args) -> int:
    spec = _build_spec(args)
    mat = sample(args.n, spec, Seed(args.seed))
    trace = charpoly.evolve(mat, args.z, args.kappa)
    _write_text(args.out, trace.to_csv_string())
    if args.scalar_out is not None:
        indices = trace.indices
        lin = scalar_regime.linearize(mat, indices)
        _write_text(args.scalar_out, scalar_regime.scalar_csv(trace, lin))
    if args.blocks_out is not None:
        bt = oscillatory.blocks(trace, trace.indices, kappa=args.kappa,
                                tau=args.tau)
        _write_text(args.blocks_out, bt.to_csv())
    return 0


def cmd_esd(args) -> int:
    spec = _build_spec(args)
    grid = np.linspace(args.grid_lo, args.grid_hi, args.grid_points)
    report = stats.esd_report(spec, args.n, Seed(args.seed), grid)
    text = report.to_json() if args.format == "json" else report.to_csv()
    _write_text(args.out, text)
    return 0


def cmd_blocks(args) -> int:
    indices = charpoly.critical_indices(args.n, args.z, args.kappa)
    if args.dry_run:
        sched = oscillatory.block_schedule(indices.k0, args.kappa, args.tau)
        lines = ["i,hl_i,j_i"]
        for i in range(1, sched.t0 + 1):
            lines.append("%d,%d,%.17g" % (i, sched.hl[i], sched.jw[i]))
        _write_text(args.out, "\n".join(lines) + "\n")
        return 0
    spec = _build_spec(args)
    mat = sample(args.n, spec, Seed(args.seed))
    trace = charpoly.evolve(mat, args.z, args.kappa)
    bt = oscillatory.blocks(trace, indices, kappa=args.kappa, tau=args.tau)
    _write_text(args.out, bt.to_csv())
    return 0


def cmd_concentration(args) -> int:
    with open(args.infile, "r", encoding="utf-8") as fh:
        values = [float(line) for line in fh if line.strip()]
    q = stats.levy_q(np.array(values), args.eps)
    if args.format == "json":
        text = json.dumps({"eps": args.eps, "n": len(values), "q": q},
                          indent=2) + "\n"
    else:
        text = "eps,n,q\n%.17g,%d,%.17g\n" % (args.eps, len(values), q)
    _write_text(args.out, text)
    return 0


_DISPATCH = {
    "clt": cmd_clt,
    "trace": cmd_trace,
    "esd": cmd_esd,
    "blocks": cmd_blocks,
    "concentration": cmd_concentration,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    problems = _validate(args)
    if problems:
        sys.stderr.write("invalid configuration: " + "; ".join(problems) + "\n")
        return 2
    try:
        return _DISPATCH[args.command](args)
    except (JacobilogError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
