"""Batch front end: run instance files, emit solution/trace/figure artifacts,
and generate reproducible instances.

Exit codes: 0 for a definitive answer (optimal, certificate, infeasible),
2 when a limit stopped the run, 1 on errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .bnb import SolvingStage, solve
from .errors import InstanceError, SolverError
from .instances import dump_instance, generate, load_instance
from .problems import graph_isomorphism
from .report import render_bounds_figure, write_solution_json, write_trace_csv
from .settings import apply_setting


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchwolfe",
        description="Mixed-integer convex solver with Frank-Wolfe node relaxations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="solve an instance file")
    run_p.add_argument("instance", help="path to a JSON instance file")
    run_p.add_argument("--out", default=".", help="output directory (default: .)")
    run_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="settings override with a dotted key, repeatable")
    run_p.add_argument("--time-limit", type=float, default=None, metavar="S")
    run_p.add_argument("--node-limit", type=int, default=None, metavar="N")
    run_p.add_argument("--seed", type=int, default=None, metavar="K")
    run_p.add_argument("--verbose", action="store_true")
    run_p.add_argument("--no-figure", action="store_true",
                       help="skip rendering the bound-progress figure")

    gen_p = sub.add_parser("generate", help="write a reproducible instance file")
    gen_p.add_argument("kind", choices=["graph_isomorphism", "experiment_design",
                                        "network_design"])
    gen_p.add_argument("--out", required=True, help="output file path")
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--n", type=int, default=None, help="graph size / design columns")
    gen_p.add_argument("--degree", type=int, default=3, help="regular-graph degree")
    gen_p.add_argument("--non-isomorphic", action="store_true",
                       help="sample the second graph independently")
    gen_p.add_argument("--m", type=int, default=None, help="candidate experiments")
    gen_p.add_argument("--budget", type=int, default=None)
    gen_p.add_argument("--criterion", choices=["A", "D"], default="A")
    gen_p.add_argument("--nodes", type=int, default=8)
    gen_p.add_argument("--sources", type=int, default=2)
    gen_p.add_argument("--destinations", type=int, default=1)
    gen_p.add_argument("--candidates", type=int, default=3)
    return parser


def _parse_overrides(pairs):
    for pair in pairs:
        if "=" not in pair:
            raise InstanceError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        yield key.strip(), value.strip()


def _finite_or_none(value):
    return float(value) if value is not None and math.isfinite(value) else None


def _cmd_run(args) -> int:
    problem, settings, data = load_instance(args.instance)
    for key, value in _parse_overrides(args.set):
        try:
            apply_setting(settings, key, value)
        except (KeyError, ValueError) as exc:
            raise InstanceError(f"--set {key}: {exc}") from exc
    if args.time_limit is not None:
        settings.tolerances.time_limit_s = args.time_limit
    if args.node_limit is not None:
        settings.tolerances.node_limit = args.node_limit
    if args.seed is not None:
        settings.heuristic.rng_seed = args.seed
    if args.verbose:
        settings.branch_and_bound.verbose = True

    x, tlmo, result = solve(problem, settings)
    status = result["status"]
    tree = result["tree"]
    kind = data["kind"]

    verdict = None
    if kind == "graph_isomorphism":
        verdict = graph_isomorphism.verdict(tree)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out_dir / "trace.csv", result["trace"])
    payload = {
        "kind": kind,
        "status": status.value,
        "objective": _finite_or_none(result["upper_bound"]),
        "lower_bound": _finite_or_none(result["lower_bound"]),
        "rel_gap": _finite_or_none(result["rel_gap"]),
        "nodes_processed": result["nodes_processed"],
        "lmo_calls": result["lmo_calls"],
        "lmo_time_s": result["lmo_time_s"],
        "total_time_s": result["total_time_s"],
        "solution": [float(v) for v in x] if x is not None else None,
    }
    if verdict is not None:
        payload["verdict"] = verdict
    write_solution_json(out_dir / "solution.json", payload)
    if not args.no_figure:
        render_bounds_figure(out_dir / "bounds.png", result["trace"],
                             title=problem.name or kind)

    obj = payload["objective"]
    obj_text = f"{obj:.6g}" if obj is not None else "-"
    summary = (f"{kind} status={status.value} objective={obj_text} "
               f"nodes={result['nodes_processed']} lmo_calls={result['lmo_calls']} "
               f"time={result['total_time_s']:.2f}s")
    if verdict is not None:
        summary += f" verdict={verdict}"
    print(summary)

    if status in (SolvingStage.OPTIMAL_REACHED, SolvingStage.INFEASIBLE):
        return 0
    if status == SolvingStage.USER_STOP:
        return 0 if verdict in ("isomorphic", "non_isomorphic") else 2
    return 2


def _cmd_generate(args) -> int:
    params = {}
    if args.kind == "graph_isomorphism":
        if args.n is not None:
            params["n"] = args.n
        params["degree"] = args.degree
        params["isomorphic"] = not args.non_isomorphic
    elif args.kind == "experiment_design":
        if args.m is not None:
            params["m"] = args.m
        if args.n is not None:
            params["n"] = args.n
        params["budget"] = args.budget
        params["criterion"] = args.criterion
    else:
        params.update(nodes=args.nodes, sources=args.sources,
                      destinations=args.destinations, candidates=args.candidates)
    try:
        data = generate(args.kind, seed=args.seed, **params)
    except ValueError as exc:
        raise InstanceError(str(exc)) from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_instance(data))
    print(f"wrote {args.kind} instance to {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_generate(args)
    except (InstanceError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
