"""Command line entry point: ``cvarlab {estimate,bound,bandit,experiment}``.

Exit codes: 0 on success, 2 on bad arguments (argparse convention), 1 on
runtime failures, with the exception class name on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds
from .bandit import ALGORITHM_NAMES, BanditEnv, run_cvar_sr, run_uniform
from .errors import CVaRLabError, IOFailure
from .estimators import EMPIRICAL, GAUSSIAN_PLUGIN, TRUNCATED, EstimatorSpec, estimate
from .experiments import read_json, replication_seed, run_config, write_results

SEED_MAX = 2**64 - 1


def _dumps(obj) -> str:
    # repr-based float rendering round-trips exactly.
    return json.dumps(obj, sort_keys=True)


def _add_estimator_flags(p: argparse.ArgumentParser, choices) -> None:
    p.add_argument("--estimator", choices=choices, default=EMPIRICAL, help="CVaR estimator (default: empirical)")
    p.add_argument("--p", type=float, help="moment order in (1, 2] for the truncated estimator")
    p.add_argument("--u", type=float, help="moment bound E|X|^p < u for the truncated estimator")
    p.add_argument("--delta", type=float, default=0.01, help="confidence parameter in (0, 1) for truncation levels (default: 0.01)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvarlab", description="CVaR estimation, concentration bounds and CVaR bandits.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate VaR and CVaR from a sample file")
    est.add_argument("input", help="one-column CSV, or raw little-endian float64 stream")
    est.add_argument("--input-format", choices=["csv", "f64"], help="default: csv for *.csv, else f64")
    est.add_argument("--alpha", type=float, required=True, help="risk level in (0, 1)")
    _add_estimator_flags(est, [EMPIRICAL, TRUNCATED, GAUSSIAN_PLUGIN])

    bnd = sub.add_parser("bound", help="evaluate or invert a concentration bound")
    bnd.add_argument("--kind", choices=["var", "light", "heavy", "simplified"], required=True)
    bnd.add_argument("--n", type=int, help="sample count")
    bnd.add_argument("--eps", type=float, required=True, help="deviation epsilon > 0")
    bnd.add_argument("--c", type=float, default=1.0, help="distribution-dependent constant (default: 1.0)")
    bnd.add_argument("--alpha", type=float, help="risk level (light, heavy, simplified)")
    bnd.add_argument("--sigma", type=float, help="light-tail sigma")
    bnd.add_argument("--b", type=float, help="light-tail b")
    bnd.add_argument("--v-alpha", type=float, help="true VaR at alpha (light)")
    bnd.add_argument("--p", type=float, help="moment order in (1, 2] (heavy)")
    bnd.add_argument("--G", type=float, help="rate constant G (simplified)")
    bnd.add_argument("--solve-n", action="store_true", help="print the smallest n with bound <= --target-delta")
    bnd.add_argument("--target-delta", type=float, help="target probability for --solve-n")

    ban = sub.add_parser("bandit", help="run CVaR best-arm identification")
    ban.add_argument("--env", required=True, help='JSON file {"arms": [...], "alpha": a}')
    ban.add_argument("--budget", type=int, required=True, help="total pulls n")
    ban.add_argument("--algorithm", choices=ALGORITHM_NAMES, default="cvar-sr")
    _add_estimator_flags(ban, [EMPIRICAL, TRUNCATED])
    ban.add_argument("--seed", type=int, default=0, help="master seed, unsigned 64-bit (default: 0)")
    ban.add_argument("--reps", type=int, default=1, help="number of independent runs (default: 1)")

    exp = sub.add_parser("experiment", help="run a deviation or misidentification sweep")
    exp.add_argument("--config", required=True, help="JSON experiment config")
    exp.add_argument("--out", required=True, help="output file")
    exp.add_argument("--format", choices=["csv", "json"], help="default: from --out suffix, else json")
    exp.add_argument("--threads", type=int, help="worker threads (default: $CVARLAB_THREADS or 1)")

    for name, sub_parser in (("estimate", est), ("bound", bnd), ("bandit", ban), ("experiment", exp)):
        sub_parser.set_defaults(handler=COMMANDS[name], subparser=sub_parser)
    return parser


def _estimator_spec(parser, args) -> EstimatorSpec:
    if args.estimator == TRUNCATED:
        if args.p is None or args.u is None:
            parser.error("--estimator truncated requires --p and --u")
        if not 1.0 < args.p <= 2.0:
            parser.error("--p must lie in (1, 2]")
        if not args.u > 0:
            parser.error("--u must be positive")
        if not 0.0 < args.delta < 1.0:
            parser.error("--delta must lie in (0, 1)")
        return EstimatorSpec(TRUNCATED, args.p, args.u, args.delta)
    if args.p is not None or args.u is not None:
        parser.error("--p and --u only apply to --estimator truncated")
    return EstimatorSpec(args.estimator)


def _check_alpha(parser, alpha, required=True) -> None:
    if alpha is None:
        if required:
            parser.error("--alpha is required")
        return
    if not 0.0 < alpha < 1.0:
        parser.error("--alpha must lie in (0, 1)")


def load_samples(path: str, fmt: str | None) -> np.ndarray:
    fmt = fmt or ("csv" if path.lower().endswith(".csv") else "f64")
    try:
        if fmt == "csv":
            values = np.loadtxt(path, delimiter=",", dtype=float, ndmin=1)
        else:
            values = np.fromfile(path, dtype="<f8")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    return values.ravel()


def cmd_estimate(parser, args, out) -> None:
    _check_alpha(parser, args.alpha)
    spec = _estimator_spec(parser, args)
    values = load_samples(args.input, args.input_format)
    out.write(_dumps(estimate(values, args.alpha, spec).to_dict()) + "\n")


def _bound_spec(parser, args):
    need = {
        "var": [],
        "light": ["alpha", "sigma", "b", "v_alpha"],
        "heavy": ["alpha", "p"],
        "simplified": ["alpha", "G"],
    }[args.kind]
    missing = [name for name in need if getattr(args, name) is None]
    if missing:
        parser.error(f"--kind {args.kind} requires " + ", ".join("--" + m.replace("_", "-") for m in missing))
    if args.alpha is not None:
        _check_alpha(parser, args.alpha)
    if not args.eps > 0:
        parser.error("--eps must be positive")
    if not args.c > 0:
        parser.error("--c must be positive")
    try:
        if args.kind == "var":
            return bounds.VarBound(args.c)
        if args.kind == "light":
            return bounds.LightBound(bounds.LightBoundParams(args.sigma, args.b, args.v_alpha, args.c, args.alpha))
        if args.kind == "heavy":
            return bounds.HeavyBound(bounds.HeavyBoundParams(args.p, args.c, args.alpha))
        return bounds.SimplifiedBound(args.alpha, args.G)
    except ValueError as exc:
        parser.error(str(exc))


def cmd_bound(parser, args, out) -> None:
    spec = _bound_spec(parser, args)
    if args.solve_n:
        if args.target_delta is None or not args.target_delta > 0:
            parser.error("--solve-n requires a positive --target-delta")
        out.write(_dumps({"n": bounds.invert_for_n(args.eps, args.target_delta, spec)}) + "\n")
        return
    if args.n is None or args.n < 1:
        parser.error("--n >= 1 is required unless --solve-n is given")
    out.write(_dumps(spec(args.n, args.eps).to_dict()) + "\n")


def cmd_bandit(parser, args, out) -> None:
    spec = _estimator_spec(parser, args)
    if not 0 <= args.seed <= SEED_MAX:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    env = BanditEnv.from_dict(read_json(args.env))
    runner = run_cvar_sr if args.algorithm == "cvar-sr" else run_uniform
    best = env.best_arm()
    errors = 0
    for rep in range(args.reps):
        run = runner(env, args.budget, spec, replication_seed(args.seed, "bandit", 0, rep))
        errors += run.recommendation != best
        out.write(_dumps(run.to_dict()) + "\n")
    out.write(_dumps({"misid_rate": errors / args.reps, "reps": args.reps, "best_arm": best}) + "\n")


def cmd_experiment(parser, args, out) -> None:
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    fmt = args.format or ("csv" if args.out.lower().endswith(".csv") else "json")
    curve = run_config(read_json(args.config), args.threads)
    path = write_results(curve, Path(args.out), fmt)
    out.write(_dumps({"out": str(path), "format": fmt, "points": len(curve.points)}) + "\n")


COMMANDS = {
    "estimate": cmd_estimate,
    "bound": cmd_bound,
    "bandit": cmd_bandit,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.handler(args.subparser, args, sys.stdout)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CVaRLabError, ValueError, KeyError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
