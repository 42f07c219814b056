"""Lazy graph search whose vertices and edges come from trajectory optimization.

Nodes are per-parent copies of lattice voxels. A popped node is handled by
one of three steps depending on what is known about it:

* configuration unknown: solve the vertex problem of its voxel, re-queue with
  the inflated cost ``(1 + omega**n_i) * c``;
* configuration known, edge from parent unknown: solve the edge problem,
  re-queue with the true cost ``c``;
* both known: expand (close the voxel, queue copies of its neighbours).

Solver results are cached in a :class:`VoxelGraph`, so each voxel and each
directed voxel pair is solved at most once per graph.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import (EdgeStatus, GridSpec, Trajectory, VertexStatus, VoxelGraph, VoxelId,
                    edge_region, neighbors)
from .micp import BnbStats, MicpSolution, MicpStatus, SolverError, solve_micp
from .qp import QpSettings
from .scenario import FACES, Scenario, build_edge_problem, build_vertex_problem, count_binaries

logger = logging.getLogger(__name__)

WARM_START_THRESHOLD = 0.1


class SearchStatus(enum.Enum):
    FOUND = "found"
    NO_PATH = "no_path"


class SearchAborted(RuntimeError):
    """A subproblem solve failed; ``counters`` and ``events`` hold the partial run."""

    def __init__(self, message, counters=None, events=None):
        super().__init__(message)
        self.counters = counters
        self.events = events


@dataclass(frozen=True)
class CostConfig:
    omega: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValueError("omega must be finite and non-negative")


def inflation(omega: float, n_i: int) -> float:
    """``omega**n_i``, taken as 0 whenever ``omega == 0`` (also for ``n_i == 0``)."""
    if omega == 0:
        return 0.0
    try:
        return float(omega) ** int(n_i)
    except OverflowError:
        return math.inf


def cost(v1, v2) -> float:
    return float(np.linalg.norm(np.asarray(v1, dtype=float) - np.asarray(v2, dtype=float)))


def cost_to(v1, v2, n_i: int, cfg: CostConfig) -> float:
    return (1.0 + inflation(cfg.omega, n_i)) * cost(v1, v2)


def heuristic(v, goal) -> float:
    return cost(v, goal)


def unknown_heuristic(grid: GridSpec, vid: VoxelId, goal) -> float:
    """Heuristic for a voxel without configuration: its point nearest the goal, at rest."""
    goal = np.asarray(goal, dtype=float)
    p = grid.box(vid).nearest_point(goal[:2])
    return float(np.linalg.norm(np.concatenate([p - goal[:2], goal[2:]])))


def boundary_cost(grid: GridSpec, parent_conf, vid: VoxelId) -> float:
    """Distance from the parent's position to the nearest point of voxel ``vid``.

    A lower bound on ``c`` to any configuration inside that voxel.
    """
    p = np.asarray(parent_conf, dtype=float)[:2]
    return float(np.linalg.norm(grid.box(vid).nearest_point(p) - p))


def max_voxel_binaries(sc: Scenario, grid: GridSpec) -> int:
    """Largest number of disjunction binaries per timestep inside one voxel."""
    return max(len(FACES) * len(sc.obstacles_in(grid.box(v))) for v in grid.voxels())


def suboptimality_alpha(cfg: CostConfig, N_edge: int, B_max: int, i: int, d: int) -> float:
    M = N_edge * B_max * (i + 1) ** d
    return 1.0 + inflation(cfg.omega, M)


@dataclass
class SearchNode:
    voxel_id: VoxelId
    parent: SearchNode | None
    g_hat: float
    h_hat: float
    true_vertex: bool = False
    true_edge: bool = False

    @property
    def f_hat(self) -> float:
        return self.g_hat + self.h_hat


@dataclass
class SolveRecord:
    """One vertex or edge subproblem solve."""

    kind: str
    voxels: tuple
    n_binaries: int
    status: str
    stats: BnbStats


@dataclass
class SearchCounters:
    pops: int = 0
    expansions: int = 0
    vertex_solves: int = 0
    edge_solves: int = 0
    binary_edge_solves: int = 0
    vertex_cache_hits: int = 0
    edge_cache_hits: int = 0
    closed_skips: int = 0
    goal_pops: int = 0
    bnb_nodes: int = 0
    qp_solves: int = 0
    warm_starts: int = 0
    solves: list[SolveRecord] = field(default_factory=list)

    @property
    def cache_hits(self) -> int:
        return self.vertex_cache_hits + self.edge_cache_hits

    @property
    def vertex_events(self) -> int:
        return self.vertex_solves + self.vertex_cache_hits

    @property
    def edge_events(self) -> int:
        return self.edge_solves + self.edge_cache_hits

    @property
    def unordered_edge_solves(self) -> int:
        return len({frozenset(r.voxels) for r in self.solves if r.kind == "edge"})

    def as_row(self) -> dict:
        return {
            "pops": self.pops,
            "expansions": self.expansions,
            "vertex_solves": self.vertex_solves,
            "edge_solves": self.edge_solves,
            "binary_edge_solves": self.binary_edge_solves,
            "cache_hits": self.cache_hits,
            "bnb_nodes": self.bnb_nodes,
            "qp_solves": self.qp_solves,
            "warm_starts": self.warm_starts,
        }


@dataclass
class SearchResult:
    status: SearchStatus
    voxels: list[VoxelId]
    configurations: list[np.ndarray]
    edges: list[Trajectory]
    cost: float
    counters: SearchCounters
    events: list[dict]
    wall_time: float = 0.0
    graph: VoxelGraph | None = None

    @property
    def found(self) -> bool:
        return self.status is SearchStatus.FOUND

    @property
    def states(self) -> np.ndarray:
        """Concatenated edge trajectories (shared endpoints once)."""
        if not self.edges:
            return np.array(self.configurations[:1]).reshape(-1, 4)
        parts = [self.edges[0].states] + [e.states[1:] for e in self.edges[1:]]
        return np.vstack(parts)

    @property
    def inputs(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 2))
        return np.vstack([e.inputs for e in self.edges])

    @property
    def waypoint_mask(self) -> np.ndarray:
        """True at the rows of :attr:`states` that are path vertices."""
        mask = np.zeros(len(self.states), dtype=bool)
        mask[0] = True
        k = 0
        for e in self.edges:
            k += e.horizon
            mask[k] = True
        return mask


class _Solver:
    """Vertex and edge subproblem solves against a shared graph."""

    def __init__(self, sc: Scenario, graph: VoxelGraph, N_edge: int, warm_start_enabled: bool,
                 counters: SearchCounters, settings: QpSettings | None = None,
                 warm_threshold: float = WARM_START_THRESHOLD):
        self.sc = sc
        self.graph = graph
        self.grid = graph.grid
        self.N = N_edge
        self.warm = warm_start_enabled
        self.counters = counters
        self.settings = settings
        self.threshold = warm_threshold

    def _run(self, kind, voxels, problem, warm=None) -> MicpSolution:
        try:
            sol = solve_micp(problem, warm, settings=self.settings)
        except SolverError as exc:
            raise SearchAborted(f"{kind} solve for {voxels} failed: {exc}", self.counters) from exc
        c = self.counters
        c.bnb_nodes += sol.stats.nodes_explored
        c.qp_solves += sol.stats.qp_solves
        c.solves.append(SolveRecord(kind, voxels, problem.n_binaries, sol.status.value, sol.stats))
        if sol.status not in (MicpStatus.OPTIMAL, MicpStatus.INFEASIBLE):
            raise SearchAborted(f"{kind} solve for {voxels} ended with {sol.status.value}", c)
        return sol

    def vertex(self, vid: VoxelId):
        """Return ``(record, solve_stats)``; stats is None on a cache hit."""
        rec = self.graph.check_same_vertex(vid)
        if rec is not None:
            self.counters.vertex_cache_hits += 1
            return rec, None
        problem = build_vertex_problem(self.sc, self.grid.box(vid), label=("vertex", vid))
        sol = self._run("vertex", (vid,), problem)
        self.counters.vertex_solves += 1
        conf = sol.primal[:4] if sol.status is MicpStatus.OPTIMAL else None
        return self.graph.set_vertex(vid, conf), sol.stats

    def edge(self, a: VoxelId, b: VoxelId):
        rec = self.graph.check_same_pair(a, b)
        if rec is not None:
            self.counters.edge_cache_hits += 1
            return rec, None
        conf_a = self.graph.vertex(a).configuration
        conf_b = self.graph.vertex(b).configuration
        problem = build_edge_problem(self.sc, edge_region(self.grid, a, b), conf_a, conf_b, self.N,
                                     label=("edge", a, b))
        warm = None
        if self.warm:
            warm = self.graph.find_warm_start(conf_a, conf_b, self.threshold, problem.layout)
            if warm is not None:
                self.counters.warm_starts += 1
        sol = self._run("edge", (a, b), problem, warm)
        self.counters.edge_solves += 1
        if problem.n_binaries:
            self.counters.binary_edge_solves += 1
        if sol.status is not MicpStatus.OPTIMAL:
            return self.graph.set_edge(a, b, None), sol.stats
        traj = Trajectory.from_primal(problem.layout, sol.primal, sol.objective)
        return self.graph.set_edge(a, b, traj, cost(conf_a, conf_b)), sol.stats


def _stats_dict(stats: BnbStats | None) -> dict | None:
    if stats is None:
        return None
    return {"nodes": stats.nodes_explored, "qp_solves": stats.qp_solves, "leaves": stats.leaf_nodes,
            "warm_start": stats.warm_start_used}


def lto_plan(
    sc: Scenario,
    grid: GridSpec,
    cfg: CostConfig = CostConfig(),
    warm_start_enabled: bool = True,
    N_edge: int = 7,
    *,
    graph: VoxelGraph | None = None,
    symmetric_edges: bool = False,
    settings: QpSettings | None = None,
    warm_threshold: float = WARM_START_THRESHOLD,
) -> SearchResult:
    """Plan from ``sc.start_state`` to ``sc.goal_state`` on ``grid``.

    Start and goal are snapped to their voxels, whose configurations are set
    to the exact start and goal states without a solve. A pre-filled
    ``graph`` (e.g. with every vertex validated) is used as the cache.

    Raises
    ------
    SearchAborted
        When a subproblem solve fails (iteration limit, unbounded relaxation).
    """
    t0 = time.perf_counter()
    counters = SearchCounters()
    events: list[dict] = []
    if graph is None:
        graph = VoxelGraph(grid, symmetric_edges)
    solver = _Solver(sc, graph, N_edge, warm_start_enabled, counters, settings, warm_threshold)
    goal = sc.goal_state
    start_v = grid.voxel_of(sc.start_state)
    goal_v = grid.voxel_of(goal)
    graph.set_vertex(start_v, sc.start_state)
    graph.set_vertex(goal_v, goal)

    def finish(status, node=None):
        voxels, confs, edges, total = [], [], [], np.inf
        if node is not None:
            total = 0.0
            chain = []
            while node is not None:
                chain.append(node.voxel_id)
                node = node.parent
            voxels = chain[::-1]
            confs = [graph.vertex(v).configuration for v in voxels]
            for a, b in zip(voxels, voxels[1:]):
                rec = graph.check_same_pair(a, b)
                edges.append(rec.trajectory)
                total += rec.cost
        return SearchResult(status, voxels, confs, edges, total, counters, events,
                            time.perf_counter() - t0, graph)

    if start_v == goal_v:
        counters.pops = counters.goal_pops = 1
        events.append({"pop": 1, "action": "goal", "voxel": list(start_v), "g": 0.0, "f": 0.0})
        res = finish(SearchStatus.FOUND, SearchNode(start_v, None, 0.0, 0.0, True, True))
        res.configurations = [sc.start_state.copy()]
        return res

    tie = itertools.count()
    open_q: list = []
    closed: set[VoxelId] = set()
    # lowest g of a queued copy with a solved edge, per voxel
    best_true_g: dict[VoxelId, float] = {}

    def push(node: SearchNode) -> bool:
        best = best_true_g.get(node.voxel_id)
        if best is not None and best <= node.g_hat:
            return False
        if node.true_edge:
            best_true_g[node.voxel_id] = node.g_hat
        heapq.heappush(open_q, ((node.f_hat, -node.g_hat, node.voxel_id, next(tie)), node))
        return True

    def n_i(a: VoxelId, b: VoxelId) -> int:
        return count_binaries(sc, edge_region(grid, a, b), N_edge)

    push(SearchNode(start_v, None, 0.0, heuristic(sc.start_state, goal), True, True))

    while open_q:
        _, node = heapq.heappop(open_q)
        counters.pops += 1
        vid = node.voxel_id
        ev = {"pop": counters.pops, "voxel": list(vid),
              "parent": list(node.parent.voxel_id) if node.parent else None,
              "g": node.g_hat, "f": node.f_hat}
        events.append(ev)
        if vid in closed:
            counters.closed_skips += 1
            ev["action"] = "skip_closed"
            continue
        if vid == goal_v and node.true_vertex and node.true_edge:
            counters.goal_pops += 1
            ev["action"] = "goal"
            return finish(SearchStatus.FOUND, node)
        parent = node.parent

        if node.true_vertex and node.true_edge:
            ev["action"] = "expand"
            counters.expansions += 1
            closed.add(vid)
            conf = graph.vertex(vid).configuration
            pushed = 0
            for nb in neighbors(grid, vid):
                if nb in closed:
                    continue
                rec = graph.vertex(nb)
                if rec.status is VertexStatus.INFEASIBLE:
                    continue
                if rec.status is VertexStatus.VALIDATED:
                    child = SearchNode(nb, node, node.g_hat + cost_to(conf, rec.configuration, n_i(vid, nb), cfg),
                                       heuristic(rec.configuration, goal), True, False)
                else:
                    child = SearchNode(nb, node, node.g_hat + boundary_cost(grid, conf, nb),
                                       unknown_heuristic(grid, nb, goal), False, False)
                pushed += push(child)
            ev["pushed"] = pushed

        elif node.true_vertex:
            ev["action"] = "update_edge"
            rec, stats = solver.edge(parent.voxel_id, vid)
            ev["cached"] = stats is None
            ev["solver"] = _stats_dict(stats)
            if rec.status is not EdgeStatus.SOLVED:
                ev["outcome"] = "infeasible"
                continue
            node.true_edge = True
            node.g_hat = parent.g_hat + rec.cost
            ev["outcome"] = "queued" if push(node) else "pruned"

        else:
            ev["action"] = "update_vertex"
            rec, stats = solver.vertex(vid)
            ev["cached"] = stats is None
            ev["solver"] = _stats_dict(stats)
            if rec.status is not VertexStatus.VALIDATED:
                ev["outcome"] = "infeasible"
                continue
            node.true_vertex = True
            pconf = graph.vertex(parent.voxel_id).configuration
            node.g_hat = parent.g_hat + cost_to(pconf, rec.configuration, n_i(parent.voxel_id, vid), cfg)
            node.h_hat = heuristic(rec.configuration, goal)
            ev["outcome"] = "queued" if push(node) else "pruned"

    return finish(SearchStatus.NO_PATH)
