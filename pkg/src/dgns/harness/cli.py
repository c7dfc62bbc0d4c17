"""Command-line entry point: ``dgns <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..criteria import CRITERIA, criteria_suite
from ..gronwall import GronwallProblem, comparison_check, integrate_majorant
from ..iteration import RecurrenceSpec, estimate_threshold, iterate
from .checkpoint import load_trajectory
from .config import ConfigError, load_config, parse_window
from .experiment import _json_safe, diagnose_checkpoints, read_series_csv, run_experiment
from .plots import render_report_plots


def _print_json(obj) -> None:
    print(json.dumps(_json_safe(obj), indent=2, sort_keys=True))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, args.out)
    print(f"report written to {result.out_dir / 'report.json'} (status: {result.report['status']})")
    for err in result.report["errors"]:
        print(f"  stage {err['stage']} failed: {err['message']}", file=sys.stderr)
    return result.exit_code


def cmd_diagnose(args) -> int:
    traj = load_trajectory(args.checkpoints)
    window = parse_window(args.window)
    config = {"checkpoints": str(args.checkpoints), "window": list(window), "levels": args.levels, "lambda": args.lam}
    if args.levels < 2:
        raise ConfigError("levels must be >= 2")
    result = diagnose_checkpoints(traj, window, args.levels, args.lam, args.out, config)
    print(f"report written to {Path(args.out) / 'report.json'} (status: {result.report['status']})")
    return result.exit_code


def cmd_recurrence(args) -> int:
    spec = RecurrenceSpec(args.B, args.beta, args.a1, args.steps)
    orbit = iterate(spec)
    est = estimate_threshold(args.B, args.beta, steps=args.steps)
    _print_json(
        {
            "verdict": orbit.verdict,
            "steps": orbit.steps,
            "log_values_head": [float(x) for x in orbit.log_values[:10]],
            "values_head": [float(x) for x in orbit.values[:10]],
            "log_threshold_analytic": est.log_analytic,
            "log_threshold_empirical": est.log_empirical,
        }
    )
    return 0


def cmd_gronwall(args) -> int:
    rows = read_series_csv(args.series)
    prob = GronwallProblem(args.A, args.tau1, args.tau2, rows["time"], rows["G"], rows["F"])
    sol = integrate_majorant(prob)
    _print_json(
        {
            "finite": sol.finite,
            "H_final": sol.H_final if sol.finite else None,
            "psi_check": sol.max_psi_gap,
            "comparison": comparison_check(prob, sol),
        }
    )
    return 0 if sol.finite else 1


def cmd_criteria(args) -> int:
    traj = load_trajectory(args.checkpoints)
    which = [w.strip() for w in args.which.split(",") if w.strip()]
    _print_json([r.as_dict() for r in criteria_suite(traj, which)])
    return 0


def cmd_report(args) -> int:
    report = json.loads((Path(args.input) / "report.json").read_text())
    for path in render_report_plots(report, args.input):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgns", description="Level-set energy diagnostics for periodic Navier-Stokes runs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a configured experiment end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override [output] dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="analyse a directory of checkpoints")
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--window", required=True, help="a:b in solver time")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("recurrence", help="iterate a_k = B^k a_{k-1}^beta")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--a1", type=float, required=True)
    p.add_argument("--steps", type=int, default=10_000)
    p.set_defaults(func=cmd_recurrence)

    p = sub.add_parser("gronwall", help="majorant pipeline on a series.csv")
    p.add_argument("--series", required=True)
    p.add_argument("--A", type=float, required=True)
    p.add_argument("--tau1", type=float, required=True)
    p.add_argument("--tau2", type=float, required=True)
    p.set_defaults(func=cmd_gronwall)

    p = sub.add_parser("criteria", help="evaluate regularity-criterion integrals")
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--which", default=",".join(CRITERIA))
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("report", help="re-render plots from report.json")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except (ValueError, OSError) as exc:
        print(f"dgns {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
