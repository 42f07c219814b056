"""Command-line entry point: ``lazyto {plan,bench,oracle,validate}``.

Exit codes: 0 success, 1 usage or input error (including a trajectory that
fails validation), 2 no path, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .baselines import full_eval_oracle, path_cost
from .bench import format_summary, run_experiment, run_planner
from .graph import GridSpec
from .io import ConfigError, PlannerSpec, load_experiment, load_scenario, read_trajectory_csv, write_trajectory_csv
from .micp import SolverError
from .search import SearchAborted, SearchStatus
from .svg import render_svg
from .validate import validate_trajectory

EXIT_OK, EXIT_USAGE, EXIT_NO_PATH, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--K", type=int, default=10, help="voxels per axis")
    p.add_argument("--i", type=int, default=1, help="edge reach in voxels")
    p.add_argument("--n-edge", type=int, default=7, help="edge horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lazyto", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="run one planner on one scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("--planner", choices=("lto", "lwa_star", "weighted_a_star", "to"), default="lto")
    p.add_argument("--omega", type=float, default=0.0)
    _grid_args(p)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--weight", type=float, default=1.0, help="heuristic weight of weighted A*")
    p.add_argument("--N", type=int, default=20, help="horizon of full trajectory optimization")
    p.add_argument("--mode", choices=("optimal", "first_feasible"), default="optimal")
    p.add_argument("--time-limit", type=float, default=math.inf)
    p.add_argument("--out", type=Path, default=Path("plan_out"))

    p = sub.add_parser("bench", help="run an experiment file")
    p.add_argument("config", type=Path)
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--out", type=Path, help="override the output directory")

    p = sub.add_parser("oracle", help="shortest path on the fully evaluated graph")
    p.add_argument("scenario", type=Path)
    _grid_args(p)
    p.add_argument("--out", type=Path, help="directory for the graph dump")

    p = sub.add_parser("validate", help="check a trajectory CSV against a scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("trajectory", type=Path)
    return parser


def _plan(args) -> int:
    sc = load_scenario(args.scenario)
    params = {"omega": args.omega, "K": args.K, "i": args.i, "N_edge": args.n_edge,
              "warm_start": not args.no_warm_start, "weight": args.weight, "N": args.N, "mode": args.mode,
              "time_limit": args.time_limit}
    res = run_planner(sc, PlannerSpec(args.planner, args.planner, params))
    args.out.mkdir(parents=True, exist_ok=True)
    if res.search is not None:
        with open(args.out / "events.jsonl", "w") as fh:
            for ev in res.search.events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")
        res.search.graph.dump_csv(args.out)
    summary = {"planner": args.planner, "status": res.status.value, "cost": res.cost,
               "wall_time": res.wall_time, **res.counters}
    print(json.dumps(summary, sort_keys=True))
    grid = GridSpec(args.K, args.i) if args.planner != "to" else None
    if res.status is not SearchStatus.FOUND:
        (args.out / "plan.svg").write_text(render_svg(sc, (), grid))
        return EXIT_NO_PATH
    write_trajectory_csv(args.out / "trajectory.csv", res.states, res.inputs, res.waypoint_mask)
    (args.out / "plan.svg").write_text(render_svg(sc, [(args.planner, res.states)], grid))
    return EXIT_OK


def _bench(args) -> int:
    cfg = load_experiment(args.config)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be positive")
        cfg.trials = args.trials
    if args.out is not None:
        cfg.output = args.out
    report = run_experiment(cfg)
    print(format_summary(report.summary()))
    print(f"wrote {cfg.output / 'report.csv'} and {cfg.output / 'summary.csv'}")
    return EXIT_OK


def _oracle(args) -> int:
    sc = load_scenario(args.scenario)
    res = full_eval_oracle(sc, GridSpec(args.K, args.i), args.n_edge)
    print(json.dumps({"status": res.status.value, "cost": res.cost, "voxels": [list(v) for v in res.voxels],
                      "vertex_solves": res.vertex_solves, "edge_solves": res.edge_solves,
                      "wall_time": res.wall_time}, sort_keys=True))
    if args.out is not None:
        res.graph.dump_csv(args.out)
        (args.out / "oracle.svg").write_text(render_svg(sc, (), graph=res.graph))
    return EXIT_OK if res.found else EXIT_NO_PATH


def _validate(args) -> int:
    sc = load_scenario(args.scenario)
    states, inputs, mask = read_trajectory_csv(args.trajectory)
    rep = validate_trajectory(sc, states, inputs)
    print(json.dumps({"ok": rep.ok, "min_clearance": rep.min_clearance,
                      "dynamics_residual": rep.dynamics_residual, "thrust_excess": rep.thrust_excess,
                      "bounds_excess": rep.bounds_excess, "velocity_excess": rep.velocity_excess,
                      "waypoint_cost": path_cost(states, mask)}, sort_keys=True))
    for f in rep.failures():
        print(f"invalid: {f}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_USAGE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"plan": _plan, "bench": _bench, "oracle": _oracle, "validate": _validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SearchAborted, SolverError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
