"""Voxel lattice roadmap with lazily filled vertex and edge records."""

from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .micp import WarmStart
from .scenario import FACES, Region, TrajectoryLayout

VoxelId = tuple[int, ...]


class NotNeighbors(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """``K`` intervals per axis of the unit square; edges reach ``i`` voxels."""

    K: int
    i: int = 1
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("only planar lattices are supported")
        if self.K < 1 or not (1 <= self.i <= self.K):
            raise ValueError(f"need K >= 1 and 1 <= i <= K, got K={self.K}, i={self.i}")

    @property
    def r(self) -> float:
        return self.i / self.K

    @property
    def n_vertices(self) -> int:
        return self.K ** self.d

    @property
    def max_edges(self) -> float:
        """Unordered neighbour pairs bound ``((2i+1)^d - 1) K^d / 2``."""
        return ((2 * self.i + 1) ** self.d - 1) * self.K ** self.d / 2

    def voxels(self) -> list[VoxelId]:
        return list(itertools.product(range(self.K), repeat=self.d))

    def contains(self, vid: VoxelId) -> bool:
        return len(vid) == self.d and all(0 <= c < self.K for c in vid)

    def box(self, vid: VoxelId) -> Region:
        h = 1.0 / self.K
        return Region(vid[0] * h, vid[1] * h, (vid[0] + 1) * h, (vid[1] + 1) * h)

    def voxel_of(self, p) -> VoxelId:
        """Voxel containing position ``p``; points on the far faces go to the last voxel."""
        return tuple(min(max(int(np.floor(c * self.K)), 0), self.K - 1) for c in p[: self.d])


def neighbors(grid: GridSpec, vid: VoxelId) -> list[VoxelId]:
    if not grid.contains(vid):
        raise ValueError(f"voxel {vid} outside a {grid.K}^{grid.d} grid")
    out = []
    for off in itertools.product(range(-grid.i, grid.i + 1), repeat=grid.d):
        if any(off):
            nb = tuple(c + o for c, o in zip(vid, off))
            if grid.contains(nb):
                out.append(nb)
    return out


def are_neighbors(grid: GridSpec, a: VoxelId, b: VoxelId) -> bool:
    return max(abs(x - y) for x, y in zip(a, b)) <= grid.i


def edge_region(grid: GridSpec, a: VoxelId, b: VoxelId) -> Region:
    """Bounding box of voxels ``a`` and ``b``."""
    if not (grid.contains(a) and grid.contains(b)) or not are_neighbors(grid, a, b):
        raise NotNeighbors(f"{a} and {b} are not neighbours for i={grid.i}")
    ra, rb = grid.box(a), grid.box(b)
    return Region(min(ra.xmin, rb.xmin), min(ra.ymin, rb.ymin), max(ra.xmax, rb.xmax), max(ra.ymax, rb.ymax))


class VertexStatus(enum.Enum):
    UNKNOWN = "unknown"
    VALIDATED = "validated"
    INFEASIBLE = "infeasible"


class EdgeStatus(enum.Enum):
    UNKNOWN = "unknown"
    SOLVED = "solved"
    INFEASIBLE = "infeasible"


@dataclass
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    # (obstacle, timestep) -> face values, as produced by TrajectoryLayout.binaries
    binaries: dict = field(default_factory=dict)
    objective: float = 0.0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 4)
        self.inputs = np.asarray(self.inputs, dtype=float).reshape(-1, 2)
        if len(self.states) != len(self.inputs) + 1:
            raise ValueError("a trajectory needs exactly one more state than inputs")

    @property
    def horizon(self) -> int:
        return len(self.inputs)

    @classmethod
    def from_primal(cls, layout: TrajectoryLayout, primal: np.ndarray, objective: float) -> Trajectory:
        return cls(layout.states(primal).copy(), layout.inputs(primal).copy(), layout.binaries(primal), objective)

    def reversed(self) -> Trajectory:
        """Time reversal: states backwards with velocities negated, inputs backwards.

        For the double integrator this maps a solution of one direction to a
        dynamically consistent solution of the other; binaries follow their
        states (timestep t becomes N - t).
        """
        st = self.states[::-1].copy()
        st[:, 2:] *= -1.0
        N = self.horizon
        bins = {(o, N - t): v for (o, t), v in self.binaries.items()}
        return Trajectory(st, self.inputs[::-1].copy(), bins, self.objective)

    def warm_start(self, layout: TrajectoryLayout) -> WarmStart:
        """Map onto ``layout``: binaries by (obstacle, timestep), missing ones set to 1."""
        z = np.array([self.binaries.get((o, t), (1,) * len(FACES))[f] for o, t, f in layout.binary_keys],
                     dtype=float)
        guess = None
        if layout.horizon == self.horizon:
            guess = np.concatenate([self.states.reshape(-1), self.inputs.reshape(-1), z])
        return WarmStart(z, guess)


@dataclass
class VertexRecord:
    voxel_id: VoxelId
    status: VertexStatus = VertexStatus.UNKNOWN
    configuration: np.ndarray | None = None


@dataclass
class EdgeRecord:
    endpoints: tuple[VoxelId, VoxelId]
    status: EdgeStatus = EdgeStatus.UNKNOWN
    trajectory: Trajectory | None = None
    cost: float = np.inf
    reversed_from_cache: bool = False


class VoxelGraph:
    """Lazy vertex/edge store for one grid.

    With ``symmetric_edges`` a solved edge ``(a, b)`` also answers ``(b, a)``
    through :meth:`Trajectory.reversed`; otherwise each direction is its own
    record.
    """

    def __init__(self, grid: GridSpec, symmetric_edges: bool = False):
        self.grid = grid
        self.symmetric_edges = symmetric_edges
        self._vertices: dict[VoxelId, VertexRecord] = {}
        self._edges: dict[tuple[VoxelId, VoxelId], EdgeRecord] = {}
        # solved edges in insertion order, the warm-start donors
        self._donors: list[EdgeRecord] = []

    def vertex(self, vid: VoxelId) -> VertexRecord:
        rec = self._vertices.get(vid)
        if rec is None:
            rec = VertexRecord(vid)
        return rec

    def set_vertex(self, vid: VoxelId, configuration) -> VertexRecord:
        if configuration is None:
            rec = VertexRecord(vid, VertexStatus.INFEASIBLE)
        else:
            rec = VertexRecord(vid, VertexStatus.VALIDATED, np.asarray(configuration, dtype=float).copy())
        self._vertices[vid] = rec
        return rec

    def set_edge(self, a: VoxelId, b: VoxelId, trajectory: Trajectory | None, cost: float = np.inf) -> EdgeRecord:
        if trajectory is None:
            rec = EdgeRecord((a, b), EdgeStatus.INFEASIBLE)
        else:
            rec = EdgeRecord((a, b), EdgeStatus.SOLVED, trajectory, float(cost))
            self._donors.append(rec)
        self._edges[(a, b)] = rec
        return rec

    def check_same_vertex(self, vid: VoxelId) -> VertexRecord | None:
        rec = self._vertices.get(vid)
        return rec if rec is not None and rec.status is not VertexStatus.UNKNOWN else None

    def check_same_pair(self, a: VoxelId, b: VoxelId) -> EdgeRecord | None:
        """Cached record for the directed pair ``(a, b)``; never solves."""
        rec = self._edges.get((a, b))
        if rec is not None:
            return rec
        if self.symmetric_edges:
            rev = self._edges.get((b, a))
            if rev is not None:
                traj = rev.trajectory.reversed() if rev.trajectory is not None else None
                return EdgeRecord((a, b), rev.status, traj, rev.cost, True)
        return None

    def find_warm_start(self, v_p, v_c, threshold: float, layout: TrajectoryLayout) -> WarmStart | None:
        """Donor edge closest to ``(v_p, v_c)`` by ``|v_p - v_i| + |v_c - v_j|``.

        Returns None when the store is empty or the best distance is not
        below ``threshold``. Ties go to the earliest stored edge.
        """
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        best, best_d = None, np.inf
        v_p = np.asarray(v_p, dtype=float)
        v_c = np.asarray(v_c, dtype=float)
        for rec in self._donors:
            traj = rec.trajectory
            d = float(np.linalg.norm(v_p - traj.states[0]) + np.linalg.norm(v_c - traj.states[-1]))
            if d < best_d:
                best, best_d = rec, d
        if best is None or best_d >= threshold:
            return None
        return best.trajectory.warm_start(layout)

    @property
    def vertices(self) -> list[VertexRecord]:
        return [self._vertices[k] for k in sorted(self._vertices)]

    @property
    def edges(self) -> list[EdgeRecord]:
        return [self._edges[k] for k in sorted(self._edges)]

    def n_solved_edges(self) -> int:
        return sum(r.status is EdgeStatus.SOLVED for r in self._edges.values())

    def dump_csv(self, directory: str | Path) -> tuple[Path, Path]:
        """Write ``vertices.csv`` and ``edges.csv``; returns their paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        vpath, epath = directory / "vertices.csv", directory / "edges.csv"
        with open(vpath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vx", "vy", "status", "px", "py", "vel_x", "vel_y"])
            for rec in self.vertices:
                conf = rec.configuration if rec.configuration is not None else [""] * 4
                w.writerow([*rec.voxel_id, rec.status.value, *[_fmt(c) for c in conf]])
        with open(epath, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ax", "ay", "bx", "by", "status", "cost"])
            for rec in self.edges:
                a, b = rec.endpoints
                cost = _fmt(rec.cost) if rec.status is EdgeStatus.SOLVED else ""
                w.writerow([*a, *b, rec.status.value, cost])
        return vpath, epath


def _fmt(v) -> str:
    return v if isinstance(v, str) else repr(float(v))
