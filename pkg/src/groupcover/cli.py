"""Command-line driver: planning, table reproduction, simulation, privacy audit.

Exit codes: 0 success, 2 usage error, 3 infeasible plan, 4 numeric failure.
Relative --output paths resolve under $GROUPCOVER_OUTDIR when it is set.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import analytics
from .degrees import GraphProfile, sample_degree_sequence
from .errors import (
    ConfigurationError,
    FitError,
    NumericError,
    ParseError,
    PlanningError,
)
from .projection import SocialGraph, assign_groups
from .simulation import (
    WorkloadConfig,
    _distribution_for,
    estimate_edge_privacy,
    run_workload,
)

PLAN_COLUMNS = ("regime", "m", "group_size", "lambda", "epsilon", "l", "k")
CURVE_COLUMNS = ("m", "connected_prob")
PRIVACY_COLUMNS = ("m", "lambda", "closed_form", "estimate", "stderr", "trials")


def _add_profile_flags(p, require_n=True):
    p.add_argument("--n", type=int, required=require_n, help="user count")
    p.add_argument("--d", type=float, required=require_n, help="mean degree")
    p.add_argument("--sigma", type=float, default=0.0, help="degree std (default 0)")


def _add_output_flags(p, default_format="csv"):
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("--output", help="output path (default: stdout)")


def _resolve(path):
    if path is None:
        return None
    outdir = os.environ.get("GROUPCOVER_OUTDIR")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _emit_rows(rows, columns, args):
    path = _resolve(args.output)
    writer = analytics.write_rows_csv if args.format == "csv" else analytics.write_rows_json
    if path is None:
        writer(rows, columns, sys.stdout)
    else:
        writer(rows, columns, path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupcover",
        description="Plan group counts and simulate retrieval costs for "
        "group-based anonymous messaging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="choose m for a design regime")
    _add_profile_flags(p_plan)
    p_plan.add_argument("--regime", choices=("light", "hybrid", "stream"), required=True)
    p_plan.add_argument("--l", type=int, default=1, help="minimum stream size (stream regime)")
    p_plan.add_argument("--confidence", type=float, help="P[stream size >= l] target")
    p_plan.add_argument(
        "--uniqueness-failure", type=float, help="max P[a second edge] (light regime)"
    )
    _add_output_flags(p_plan)

    p_t1 = sub.add_parser("table1", help="group counts across confidence targets")
    _add_profile_flags(p_t1)
    p_t1.add_argument(
        "--confidence",
        type=float,
        nargs="*",
        default=list(analytics.TABLE1_CONFIDENCES),
        help="confidence targets (default: the nine standard values)",
    )
    _add_output_flags(p_t1)

    p_sim = sub.add_parser("simulate", help="run a message workload")
    _add_profile_flags(p_sim)
    p_sim.add_argument("--m", type=int, help="group count")
    p_sim.add_argument(
        "--lambda", dest="lam", type=float, help="target mean connections; sets m=round(sqrt(nd/lambda))"
    )
    p_sim.add_argument("--ticks", type=int, default=10)
    p_sim.add_argument("--send-rate", type=float, default=0.05)
    p_sim.add_argument("--phi", type=float, default=0.0, help="header ratio")
    p_sim.add_argument("--strategy", default="poll")
    p_sim.add_argument("--replications", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--pairs", type=int, default=10_000, help="group pairs sampled")
    p_sim.add_argument("--privacy-trials", type=int, default=2_000)
    p_sim.add_argument("--poll-interval", type=int, default=1)
    p_sim.add_argument("--message-size", type=float, default=1.0)
    p_sim.add_argument("--log", help="write the adversary observation log (CSV)")
    p_sim.add_argument("--output", help="report path (default: stdout)")

    p_curve = sub.add_parser("curve", help="connection probability along an m grid")
    _add_profile_flags(p_curve)
    p_curve.add_argument("--m-min", type=int, required=True)
    p_curve.add_argument("--m-max", type=int)
    p_curve.add_argument("--points", type=int, default=20, help="log-spaced grid size")
    _add_output_flags(p_curve)

    p_priv = sub.add_parser("privacy", help="empirical edge-privacy audit")
    _add_profile_flags(p_priv)
    p_priv.add_argument("--m", type=int, required=True)
    p_priv.add_argument("--trials", type=int, default=10_000)
    p_priv.add_argument("--seed", type=int, default=0)
    _add_output_flags(p_priv)

    return parser


def cmd_plan(args, parser) -> int:
    profile = GraphProfile(args.n, args.d, args.sigma)
    if args.regime == "light":
        if args.uniqueness_failure is None:
            parser.error("--regime light requires --uniqueness-failure")
        plan = analytics.plan_light(profile, args.uniqueness_failure)
    else:
        if args.confidence is None:
            parser.error(f"--regime {args.regime} requires --confidence")
        l = 1 if args.regime == "hybrid" else args.l
        if args.regime == "hybrid" and args.l != 1:
            parser.error("--regime hybrid fixes --l 1")
        plan = analytics.plan_stream(profile, l, args.confidence)
    row = {
        "regime": plan.regime,
        "m": plan.m,
        "group_size": plan.expected_group_size,
        "lambda": plan.lambda_,
        "epsilon": plan.epsilon,
        "l": plan.l,
        "k": plan.k,
    }
    _emit_rows([row], PLAN_COLUMNS, args)
    return 0


def cmd_table1(args, parser) -> int:
    if not args.confidence:
        parser.error("--confidence needs at least one value")
    profile = GraphProfile(args.n, args.d, args.sigma)
    rows = analytics.table1(profile, args.confidence)
    _emit_rows(rows, analytics.TABLE1_COLUMNS, args)
    return 0


def cmd_simulate(args, parser) -> int:
    profile = GraphProfile(args.n, args.d, args.sigma)
    if (args.m is None) == (args.lam is None):
        parser.error("exactly one of --m / --lambda is required")
    m = args.m if args.m is not None else round(math.sqrt(args.n * args.d / args.lam))
    config = WorkloadConfig(
        profile=profile,
        m=m,
        ticks=args.ticks,
        send_rate=args.send_rate,
        phi=args.phi,
        strategy=args.strategy,
        replications=args.replications,
        seed=args.seed,
        message_size=args.message_size,
        poll_interval=args.poll_interval,
        pairs_sampled=args.pairs,
        privacy_trials=args.privacy_trials,
    )
    report, log = run_workload(config, workers=args.workers)
    out = _resolve(args.output)
    if out is None:
        report.to_json(sys.stdout)
    else:
        report.to_json(out)
    if args.log:
        log.to_csv(_resolve(args.log))
    return 0


def cmd_curve(args, parser) -> int:
    profile = GraphProfile(args.n, args.d, args.sigma)
    m_max = args.m_max if args.m_max is not None else args.m_min
    if m_max < args.m_min:
        parser.error("--m-max below --m-min")
    if args.points < 1:
        parser.error("--points must be >= 1")
    if m_max == args.m_min:
        grid = [args.m_min]
    else:
        grid = sorted(set(int(round(x)) for x in np.geomspace(args.m_min, m_max, args.points)))
    rows = [
        {"m": m, "connected_prob": p} for m, p in analytics.connection_curve(profile, grid)
    ]
    _emit_rows(rows, CURVE_COLUMNS, args)
    return 0


def cmd_privacy(args, parser) -> int:
    profile = GraphProfile(args.n, args.d, args.sigma)
    ss = np.random.SeedSequence(args.seed)
    s_deg, s_graph, s_assign, s_est = ss.spawn(4)
    degrees = sample_degree_sequence(_distribution_for(profile), profile.n, s_deg)
    graph = SocialGraph.from_degrees(degrees, s_graph)
    assignment = assign_groups(profile.n, args.m, s_assign)
    estimate, stderr = estimate_edge_privacy(graph, assignment, args.trials, s_est)
    row = {
        "m": args.m,
        "lambda": analytics.poisson_lambda(profile, args.m),
        "closed_form": analytics.edge_privacy_closed_form(profile, args.m),
        "estimate": estimate,
        "stderr": stderr,
        "trials": args.trials,
    }
    _emit_rows([row], PRIVACY_COLUMNS, args)
    return 0


COMMANDS = {
    "plan": cmd_plan,
    "table1": cmd_table1,
    "simulate": cmd_simulate,
    "curve": cmd_curve,
    "privacy": cmd_privacy,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except PlanningError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FitError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (ConfigurationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
