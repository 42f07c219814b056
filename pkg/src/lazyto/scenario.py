"""2-D free-flying robot world and its trajectory-optimization MIQPs.

State ``x = (px, py, vx, vy)``, input ``u = (ax, ay)``. Obstacles are
axis-aligned rectangles avoided with a big-M disjunction: per obstacle and
timestep one binary for each face (left, right, bottom, top), at least one of
which must hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .micp import MicpProblem
from .qp import QuadraticProgram

STATE_DIM = 4
INPUT_DIM = 2
FACES = ("left", "right", "bottom", "top")
OCTAGON_SIDES = 8


class RegionEmpty(ValueError):
    pass


class EndpointOutsideRegion(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``[xmin, xmax] x [ymin, ymax]`` in position space."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise RegionEmpty(f"degenerate region {self}")
        if self.xmin < -1e-12 or self.ymin < -1e-12 or self.xmax > 1 + 1e-12 or self.ymax > 1 + 1e-12:
            raise ValueError(f"region {self} leaves the unit square")

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2])

    def contains(self, p, tol: float = 1e-9) -> bool:
        return (self.xmin - tol <= p[0] <= self.xmax + tol) and (self.ymin - tol <= p[1] <= self.ymax + tol)

    def nearest_point(self, p) -> np.ndarray:
        return np.array([min(max(p[0], self.xmin), self.xmax), min(max(p[1], self.ymin), self.ymax)])


@dataclass(frozen=True)
class Obstacle:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def overlaps(self, region: Region) -> bool:
        """True when the obstacle interior meets the (closed) region."""
        return (self.xmin < region.xmax and self.xmax > region.xmin
                and self.ymin < region.ymax and self.ymax > region.ymin)

    def clearance(self, p) -> float:
        """Largest signed distance of ``p`` outside one of the faces (< 0 inside)."""
        return max(self.xmin - p[0], p[0] - self.xmax, self.ymin - p[1], p[1] - self.ymax)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class DynamicsModel:
    A: np.ndarray
    B: np.ndarray

    @classmethod
    def double_integrator(cls, dt: float) -> DynamicsModel:
        A = np.eye(4)
        A[0, 2] = A[1, 3] = dt
        B = np.zeros((4, 2))
        B[0, 0] = B[1, 1] = 0.5 * dt * dt
        B[2, 0] = B[3, 1] = dt
        return cls(A, B)


def octagon_halfspaces(u_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Facets ``G u <= h`` of the regular octagon inscribed in ``|u| <= u_max``."""
    ang = (np.arange(OCTAGON_SIDES) + 0.5) * 2 * np.pi / OCTAGON_SIDES
    G = np.column_stack([np.cos(ang), np.sin(ang)])
    h = np.full(OCTAGON_SIDES, u_max * math.cos(np.pi / OCTAGON_SIDES))
    return G, h


@dataclass
class Scenario:
    obstacles: list[Obstacle]
    start_state: np.ndarray
    goal_state: np.ndarray
    v_max: float = 1.0
    u_max: float = 2.0
    dt: float = 0.25
    Q: np.ndarray = field(default_factory=lambda: np.ones(4))
    big_m: float = 10.0
    name: str = "scenario"

    def __post_init__(self):
        self.obstacles = [o if isinstance(o, Obstacle) else Obstacle(*o) for o in self.obstacles]
        self.start_state = np.asarray(self.start_state, dtype=float).reshape(4)
        self.goal_state = np.asarray(self.goal_state, dtype=float).reshape(4)
        self.Q = np.asarray(self.Q, dtype=float).reshape(4)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.big_m < 2 * (1 + self.v_max * self.dt):
            raise ValueError("big_m too small for the unit square")
        for o in self.obstacles:
            if not (0 <= o.xmin < o.xmax <= 1 and 0 <= o.ymin < o.ymax <= 1):
                raise ValueError(f"obstacle {o} is not a box inside the unit square")
        for name, s in (("start", self.start_state), ("goal", self.goal_state)):
            if not (0 <= s[0] <= 1 and 0 <= s[1] <= 1):
                raise ValueError(f"{name} position outside the unit square")
            if any(o.clearance(s[:2]) < 0 for o in self.obstacles):
                raise ValueError(f"{name} state lies inside an obstacle")

    @property
    def dynamics(self) -> DynamicsModel:
        return DynamicsModel.double_integrator(self.dt)

    def obstacles_in(self, region: Region) -> list[int]:
        return [k for k, o in enumerate(self.obstacles) if o.overlaps(region)]


WORLD = Region(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class TrajectoryLayout:
    """Variable layout of a trajectory MIQP.

    ``[x_0 .. x_N, u_0 .. u_{N-1}, z]`` with ``binary_keys[k] = (obstacle,
    timestep, face)`` for the k-th binary.
    """

    horizon: int
    binary_keys: tuple[tuple[int, int, int], ...]

    @property
    def n_states(self) -> int:
        return STATE_DIM * (self.horizon + 1)

    @property
    def n_inputs(self) -> int:
        return INPUT_DIM * self.horizon

    @property
    def n_continuous(self) -> int:
        return self.n_states + self.n_inputs

    @property
    def n_variables(self) -> int:
        return self.n_continuous + len(self.binary_keys)

    def state_index(self, t: int) -> slice:
        return slice(STATE_DIM * t, STATE_DIM * (t + 1))

    def input_index(self, t: int) -> slice:
        o = self.n_states + INPUT_DIM * t
        return slice(o, o + INPUT_DIM)

    def states(self, primal: np.ndarray) -> np.ndarray:
        return np.asarray(primal[: self.n_states]).reshape(self.horizon + 1, STATE_DIM)

    def inputs(self, primal: np.ndarray) -> np.ndarray:
        return np.asarray(primal[self.n_states: self.n_continuous]).reshape(self.horizon, INPUT_DIM)

    def binaries(self, primal: np.ndarray) -> dict[tuple[int, int], tuple[int, ...]]:
        """Binary values grouped by ``(obstacle, timestep)`` in face order."""
        z = np.round(np.asarray(primal[self.n_continuous:])).astype(int)
        out: dict[tuple[int, int], list[int]] = {}
        for (obs, t, face), val in zip(self.binary_keys, z):
            out.setdefault((obs, t), [0] * len(FACES))[face] = int(val)
        return {k: tuple(v) for k, v in out.items()}


def count_binaries(sc: Scenario, region: Region, N: int) -> int:
    """Binaries of the edge problem over ``region`` with horizon ``N``."""
    return len(FACES) * N * len(sc.obstacles_in(region))


def _trajectory_problem(sc: Scenario, region: Region, x_s, x_g, N: int, obstacles: list[int], label) -> MicpProblem:
    layout = TrajectoryLayout(
        N, tuple((o, t, f) for o in obstacles for t in range(1, N + 1) for f in range(len(FACES))))
    n = layout.n_variables
    dyn = sc.dynamics

    # dynamics x_{t+1} = A x_t + B u_t
    Aeq = np.zeros((STATE_DIM * N, n))
    for t in range(N):
        rows = slice(STATE_DIM * t, STATE_DIM * (t + 1))
        Aeq[rows, layout.state_index(t + 1)] = np.eye(STATE_DIM)
        Aeq[rows, layout.state_index(t)] = -dyn.A
        Aeq[rows, layout.input_index(t)] = -dyn.B
    beq = np.zeros(STATE_DIM * N)

    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for t in range(N + 1):
        s = layout.state_index(t)
        lower[s] = [region.xmin, region.ymin, -sc.v_max, -sc.v_max]
        upper[s] = [region.xmax, region.ymax, sc.v_max, sc.v_max]
    lower[layout.state_index(0)] = x_s
    upper[layout.state_index(0)] = x_s
    lower[layout.state_index(N)] = x_g
    upper[layout.state_index(N)] = x_g
    for t in range(N):
        lower[layout.input_index(t)] = -sc.u_max
        upper[layout.input_index(t)] = sc.u_max

    G, h = octagon_halfspaces(sc.u_max)
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for t in range(N):
        for g, hk in zip(G, h):
            r = np.zeros(n)
            r[layout.input_index(t)] = g
            rows.append(r)
            rhs.append(hk)
    _add_big_m(sc, layout, rows, rhs, n)

    P = np.zeros((n, n))
    q = np.zeros(n)
    Qd = 2.0 * np.diag(sc.Q)
    for t in range(N):
        s = layout.state_index(t)
        P[s, s] = Qd
        q[s] = -Qd @ x_g
        u = layout.input_index(t)
        P[u, u] = 2.0 * np.eye(INPUT_DIM)
    offset = N * float(x_g @ (sc.Q * x_g))

    qp = QuadraticProgram(P, q, Aeq, beq, np.array(rows).reshape(-1, n), np.array(rhs),
                          lower, upper, offset)
    binaries = range(layout.n_continuous, n)
    return MicpProblem(qp, tuple(binaries), label=label, layout=layout)


def _add_big_m(sc: Scenario, layout: TrajectoryLayout, rows: list, rhs: list, n: int) -> None:
    M = sc.big_m
    base = layout.n_continuous
    # face k holds when sign * p[axis] <= sign * bound
    for k, (obs, t, face) in enumerate(layout.binary_keys):
        o = sc.obstacles[obs]
        axis, sign, bound = [(0, 1.0, o.xmin), (0, -1.0, -o.xmax), (1, 1.0, o.ymin), (1, -1.0, -o.ymax)][face]
        r = np.zeros(n)
        r[layout.state_index(t).start + axis] = sign
        r[base + k] = M
        rows.append(r)
        rhs.append(bound + M)
        if face == len(FACES) - 1:
            r = np.zeros(n)
            r[base + k - len(FACES) + 1: base + k + 1] = -1.0
            rows.append(r)
            rhs.append(-1.0)


def build_edge_problem(sc: Scenario, region: Region, x_s, x_g, N: int, label=None) -> MicpProblem:
    """Trajectory MIQP from ``x_s`` to ``x_g`` confined to ``region``.

    Only obstacles meeting the region get disjunctions; the obstacle
    constraints cover timesteps ``1..N`` (``x_0`` is a fixed, validated state).
    """
    if N < 1:
        raise ValueError("horizon must be at least 1")
    x_s = np.asarray(x_s, dtype=float).reshape(STATE_DIM)
    x_g = np.asarray(x_g, dtype=float).reshape(STATE_DIM)
    if not region.contains(x_s) or not region.contains(x_g):
        raise EndpointOutsideRegion("edge endpoints must lie inside the region")
    return _trajectory_problem(sc, region, x_s, x_g, N, sc.obstacles_in(region), label)


def build_full_problem(sc: Scenario, N: int, label="full") -> MicpProblem:
    return build_edge_problem(sc, WORLD, sc.start_state, sc.goal_state, N, label)


def build_vertex_problem(sc: Scenario, region: Region, label=None) -> MicpProblem:
    """Single-state MIQP placing a configuration inside ``region``.

    Minimizes ``|p - center|^2 + |v|^2`` so free voxels get their center at
    rest and partly blocked voxels the nearest free point.
    """
    obstacles = sc.obstacles_in(region)
    layout = TrajectoryLayout(0, tuple((o, 0, f) for o in obstacles for f in range(len(FACES))))
    n = layout.n_variables
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[:4] = [region.xmin, region.ymin, -sc.v_max, -sc.v_max]
    upper[:4] = [region.xmax, region.ymax, sc.v_max, sc.v_max]
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    _add_big_m(sc, layout, rows, rhs, n)
    P = np.zeros((n, n))
    P[:4, :4] = 2.0 * np.eye(4)
    q = np.zeros(n)
    c = region.center
    q[:2] = -2.0 * c
    qp = QuadraticProgram(P, q, None, None, np.array(rows).reshape(-1, n), np.array(rhs),
                          lower, upper, float(c @ c))
    return MicpProblem(qp, tuple(range(layout.n_continuous, n)), label=label, layout=layout)
