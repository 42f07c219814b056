"""Scenario and experiment files (YAML) and trajectory CSVs.

Scenario file::

    name: corridor            # optional
    start: [0.05, 0.5, 0, 0]  # px, py, vx, vy
    goal:  [0.95, 0.5, 0, 0]
    obstacles:                # optional, boxes inside the unit square
      - {x_min: 0.3, y_min: 0.0, x_max: 0.4, y_max: 0.45}
    params:                   # optional overrides
      v_max: 1.0
      u_max: 2.0
      dt: 0.25
      Q: [1, 1, 1, 1]
      big_m: 10.0

Experiment file::

    scenario: corridor.yaml   # relative to this file
    trials: 3
    seed: 0
    output: out/              # relative to this file, optional
    planners:
      - {planner: lto, omega: 0.0, K: 10, i: 1, N_edge: 7, warm_start: true}
      - {planner: lwa_star, K: 10}
      - {planner: weighted_a_star, K: 10, weight: 1.5}
      - {planner: to, N: 20, mode: optimal, time_limit: 60}
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .scenario import Obstacle, Scenario

PLANNERS = ("lto", "lwa_star", "weighted_a_star", "to")
TRAJECTORY_COLUMNS = ("t", "waypoint", "px", "py", "vx", "vy", "ux", "uy")
_SCENARIO_KEYS = {"name", "start", "goal", "obstacles", "params"}
_PARAM_KEYS = {"v_max", "u_max", "dt", "Q", "big_m"}
_OBSTACLE_KEYS = ("x_min", "y_min", "x_max", "y_max")
_PLANNER_KEYS = {"planner", "label", "omega", "K", "i", "N_edge", "warm_start", "weight", "N", "mode",
                 "time_limit"}


class ConfigError(ValueError):
    """Malformed scenario, experiment or trajectory file."""


def _read_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return doc


def _vector(doc, key, size, where) -> list[float]:
    val = doc.get(key)
    if not isinstance(val, (list, tuple)) or len(val) != size:
        raise ConfigError(f"{where}: '{key}' must be a list of {size} numbers")
    try:
        return [float(v) for v in val]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: '{key}' must be numeric") from exc


def scenario_from_dict(doc: dict, where: str = "scenario") -> Scenario:
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    obstacles = []
    for k, ob in enumerate(doc.get("obstacles") or []):
        if not isinstance(ob, dict) or set(ob) != set(_OBSTACLE_KEYS):
            raise ConfigError(f"{where}: obstacle {k} needs exactly the keys {list(_OBSTACLE_KEYS)}")
        obstacles.append(Obstacle(*(float(ob[key]) for key in _OBSTACLE_KEYS)))
    params = dict(doc.get("params") or {})
    unknown = set(params) - _PARAM_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown params {sorted(unknown)}")
    if "Q" in params:
        params["Q"] = np.array(_vector(params, "Q", 4, where))
    try:
        return Scenario(obstacles, _vector(doc, "start", 4, where), _vector(doc, "goal", 4, where),
                        name=str(doc.get("name", "scenario")), **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    return scenario_from_dict(_read_yaml(path), str(path))


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "start": [float(v) for v in sc.start_state],
        "goal": [float(v) for v in sc.goal_state],
        "obstacles": [dict(zip(_OBSTACLE_KEYS, o.as_tuple())) for o in sc.obstacles],
        "params": {"v_max": sc.v_max, "u_max": sc.u_max, "dt": sc.dt, "Q": [float(q) for q in sc.Q],
                   "big_m": sc.big_m},
    }


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)


@dataclass
class PlannerSpec:
    planner: str
    label: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    scenario_path: Path
    planners: list[PlannerSpec]
    trials: int = 1
    seed: int = 0
    output: Path = Path("bench_out")


def _planner_label(spec: dict) -> str:
    name = spec["planner"]
    if name == "lto":
        ws = "" if spec.get("warm_start", True) else "_cold"
        return f"lto_w{spec.get('omega', 0.0):g}_K{spec.get('K', 10)}{ws}"
    if name == "weighted_a_star":
        return f"wastar_{spec.get('weight', 1.0):g}_K{spec.get('K', 10)}"
    if name == "lwa_star":
        return f"lwa_star_K{spec.get('K', 10)}"
    return f"to_{spec.get('mode', 'optimal')}_N{spec.get('N', 20)}"


def load_experiment(path) -> ExperimentConfig:
    path = Path(path)
    doc = _read_yaml(path)
    base = path.parent
    if "scenario" not in doc or "planners" not in doc:
        raise ConfigError(f"{path}: 'scenario' and 'planners' are required")
    unknown = set(doc) - {"scenario", "planners", "trials", "seed", "output"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    scenario_path = base / str(doc["scenario"])
    if not scenario_path.is_file():
        raise ConfigError(f"{path}: scenario {scenario_path} does not exist")
    trials = doc.get("trials", 1)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"{path}: trials must be a positive integer")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"{path}: seed must be an integer")
    planners = []
    if not isinstance(doc["planners"], list) or not doc["planners"]:
        raise ConfigError(f"{path}: planners must be a non-empty list")
    for k, spec in enumerate(doc["planners"]):
        if not isinstance(spec, dict) or spec.get("planner") not in PLANNERS:
            raise ConfigError(f"{path}: planner {k} must name one of {list(PLANNERS)}")
        unknown = set(spec) - _PLANNER_KEYS
        if unknown:
            raise ConfigError(f"{path}: planner {k} has unknown keys {sorted(unknown)}")
        params = {key: v for key, v in spec.items() if key not in ("planner", "label")}
        planners.append(PlannerSpec(spec["planner"], str(spec.get("label") or _planner_label(spec)), params))
    labels = [p.label for p in planners]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{path}: planner labels must be unique, got {labels}")
    output = base / str(doc.get("output", "bench_out"))
    return ExperimentConfig(scenario_path, planners, trials, seed, output)


def write_trajectory_csv(path, states, inputs, waypoint_mask=None) -> None:
    """One row per state; inputs are blank on the last row."""
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 2)
    if waypoint_mask is None:
        waypoint_mask = np.ones(len(states), dtype=bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for t, (x, wp) in enumerate(zip(states, waypoint_mask)):
            u = [repr(float(v)) for v in inputs[t]] if t < len(inputs) else ["", ""]
            w.writerow([t, int(bool(wp)), *[repr(float(v)) for v in x], *u])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(states, inputs, waypoint_mask)``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows or set(rows[0]) != set(TRAJECTORY_COLUMNS):
        raise ConfigError(f"{path}: expected columns {list(TRAJECTORY_COLUMNS)}")
    try:
        states = np.array([[float(r[k]) for k in ("px", "py", "vx", "vy")] for r in rows])
        inputs = np.array([[float(r["ux"]), float(r["uy"])] for r in rows[:-1]]).reshape(-1, 2)
        mask = np.array([bool(int(r["waypoint"])) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return states, inputs, mask
