"""Geometric and dynamic checks for planned trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, octagon_halfspaces

CLEARANCE_TOL = 1e-6
DYNAMICS_TOL = 1e-6
LIMIT_TOL = 1e-6


@dataclass
class ValidationReport:
    min_clearance: float
    dynamics_residual: float
    thrust_excess: float
    bounds_excess: float
    velocity_excess: float

    @property
    def clearance_ok(self) -> bool:
        return self.min_clearance >= -CLEARANCE_TOL

    @property
    def dynamics_ok(self) -> bool:
        return self.dynamics_residual <= DYNAMICS_TOL

    @property
    def thrust_ok(self) -> bool:
        return self.thrust_excess <= LIMIT_TOL

    @property
    def bounds_ok(self) -> bool:
        return self.bounds_excess <= LIMIT_TOL and self.velocity_excess <= LIMIT_TOL

    @property
    def ok(self) -> bool:
        return self.clearance_ok and self.dynamics_ok and self.thrust_ok and self.bounds_ok

    def failures(self) -> list[str]:
        out = []
        if not self.clearance_ok:
            out.append(f"obstacle penetration {-self.min_clearance:.3g}")
        if not self.dynamics_ok:
            out.append(f"dynamics residual {self.dynamics_residual:.3g}")
        if not self.thrust_ok:
            out.append(f"thrust above limit by {self.thrust_excess:.3g}")
        if not self.bounds_ok:
            out.append(f"state bounds exceeded by {max(self.bounds_excess, self.velocity_excess):.3g}")
        return out


def validate_trajectory(sc: Scenario, states, inputs) -> ValidationReport:
    """Check discrete states against obstacles, dynamics, thrust octagon and box limits.

    ``states`` has one more row than ``inputs``.
    """
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 2)
    if len(states) != len(inputs) + 1:
        raise ValueError("need exactly one more state than inputs")
    clear = np.inf
    for o in sc.obstacles:
        for p in states[:, :2]:
            clear = min(clear, o.clearance(p))
    dyn = sc.dynamics
    if len(inputs):
        pred = states[:-1] @ dyn.A.T + inputs @ dyn.B.T
        residual = float(np.max(np.abs(states[1:] - pred)))
        G, h = octagon_halfspaces(sc.u_max)
        thrust = float(np.max(inputs @ G.T - h))
    else:
        residual = 0.0
        thrust = -np.inf
    pos = states[:, :2]
    bounds = float(max(np.max(-pos), np.max(pos - 1.0)))
    vel = float(np.max(np.abs(states[:, 2:])) - sc.v_max)
    return ValidationReport(float(clear), residual, thrust, bounds, vel)
