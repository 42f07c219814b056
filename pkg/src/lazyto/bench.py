"""Benchmark harness: planner suites over trials, CSV reports and summaries."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import BaselineResult, ToMode, from_search, full_to, lwa_star, weighted_a_star
from .graph import GridSpec
from .io import ExperimentConfig, PlannerSpec, load_scenario
from .scenario import Scenario
from .search import CostConfig, lto_plan

logger = logging.getLogger(__name__)

COUNTER_COLUMNS = ("vertex_solves", "edge_solves", "binary_edge_solves", "expansions", "cache_hits",
                   "bnb_nodes", "qp_solves")
REPORT_COLUMNS = ("planner", "trial", "seed", "status", "cost", "wall_time", *COUNTER_COLUMNS)
SUMMARY_COLUMNS = ("planner", "trials", "found", "cost_mean", "cost_ci95", "time_mean", "time_ci95")
Z95 = 1.96


def run_planner(sc: Scenario, spec: PlannerSpec) -> BaselineResult:
    """Run one configured planner on ``sc``."""
    p = spec.params
    if spec.planner in ("lto", "lwa_star", "weighted_a_star"):
        grid = GridSpec(int(p.get("K", 10)), int(p.get("i", 1)))
        N_edge = int(p.get("N_edge", 7))
        if spec.planner == "lto":
            res = lto_plan(sc, grid, CostConfig(float(p.get("omega", 0.0))), bool(p.get("warm_start", True)), N_edge)
            return from_search(spec.label, res)
        if spec.planner == "lwa_star":
            out = lwa_star(sc, grid, N_edge)
        else:
            out = weighted_a_star(sc, grid, N_edge, float(p.get("weight", 1.0)))
    elif spec.planner == "to":
        out = full_to(sc, int(p.get("N", 20)), ToMode(p.get("mode", "optimal")),
                      float(p.get("time_limit", math.inf)))
    else:
        raise ValueError(f"unknown planner {spec.planner!r}")
    out.planner = spec.label
    return out


def ci95(values) -> float:
    """Half-width ``1.96 * s / sqrt(n)`` with the sample standard deviation; 0 for n < 2."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(Z95 * np.std(v, ddof=1) / math.sqrt(v.size))


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    results: list[BaselineResult] = field(default_factory=list)

    def summary(self) -> list[dict]:
        out = []
        for label in dict.fromkeys(r["planner"] for r in self.rows):
            rows = [r for r in self.rows if r["planner"] == label]
            found = [r for r in rows if r["status"] == "found"]
            costs = [r["cost"] for r in found]
            times = [r["wall_time"] for r in rows]
            out.append({
                "planner": label,
                "trials": len(rows),
                "found": len(found),
                "cost_mean": float(np.mean(costs)) if costs else math.nan,
                "cost_ci95": ci95(costs) if costs else math.nan,
                "time_mean": float(np.mean(times)),
                "time_ci95": ci95(times),
            })
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    """Run every (planner, trial) cell, writing ``report.csv`` and ``summary.csv``.

    The planners are deterministic, so trials differ only in wall time; the
    seed column records ``seed + trial`` for traceability.
    """
    sc = load_scenario(cfg.scenario_path)
    report = RunReport()
    for spec in cfg.planners:
        for trial in range(cfg.trials):
            res = run_planner(sc, spec)
            logger.info("%s trial %d: %s cost=%s", spec.label, trial, res.status.value, res.cost)
            row = {"planner": spec.label, "trial": trial, "seed": cfg.seed + trial, "status": res.status.value,
                   "cost": float(res.cost), "wall_time": float(res.wall_time)}
            for c in COUNTER_COLUMNS:
                row[c] = int(res.counters.get(c, 0))
            report.rows.append(row)
            report.results.append(res)
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "report.csv", REPORT_COLUMNS, report.rows)
        write_csv(out / "summary.csv", SUMMARY_COLUMNS, report.summary())
    return report


def format_summary(summary: list[dict]) -> str:
    lines = [f"{'planner':<28} {'found':>7} {'cost':>22} {'time [s]':>22}"]
    for s in summary:
        cost = f"{s['cost_mean']:.4f} +- {s['cost_ci95']:.4f}" if s["found"] else "-"
        t = f"{s['time_mean']:.3f} +- {s['time_ci95']:.3f}"
        lines.append(f"{s['planner']:<28} {s['found']:>3}/{s['trials']:<3} {cost:>22} {t:>22}")
    return "\n".join(lines)
