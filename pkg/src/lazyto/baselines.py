"""Comparison planners and the fully evaluated graph oracle."""

from __future__ import annotations

import enum
import heapq
import itertools
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .graph import EdgeStatus, GridSpec, Trajectory, VertexStatus, VoxelGraph, VoxelId, neighbors
from .micp import solve_micp
from .qp import QpSettings
from .scenario import Scenario, build_full_problem
from .search import (CostConfig, SearchCounters, SearchResult, SearchStatus, _Solver, cost,
                     heuristic, lto_plan)


class ToMode(enum.Enum):
    OPTIMAL = "optimal"
    FIRST_FEASIBLE = "first_feasible"


@dataclass
class BaselineResult:
    planner: str
    status: SearchStatus
    cost: float
    wall_time: float
    counters: dict = field(default_factory=dict)
    states: np.ndarray | None = None
    inputs: np.ndarray | None = None
    waypoint_mask: np.ndarray | None = None
    objective: float = np.nan
    detail: str = ""
    # per-solve records of graph planners
    search_counters: SearchCounters | None = None
    search: SearchResult | None = None

    @property
    def found(self) -> bool:
        return self.status is SearchStatus.FOUND


def path_cost(states: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Sum of ``c`` between consecutive waypoints (all rows when ``mask`` is None)."""
    pts = states if mask is None else states[mask]
    return float(sum(cost(a, b) for a, b in zip(pts, pts[1:])))


def from_search(planner: str, res: SearchResult) -> BaselineResult:
    c = res.counters
    if not res.found:
        return BaselineResult(planner, res.status, np.inf, res.wall_time, c.as_row(), search_counters=c,
                              search=res)
    return BaselineResult(planner, res.status, res.cost, res.wall_time, c.as_row(), res.states, res.inputs,
                          res.waypoint_mask, search_counters=c, search=res)


def full_to(sc: Scenario, N: int, mode: ToMode = ToMode.OPTIMAL, time_limit: float = np.inf,
            settings: QpSettings | None = None) -> BaselineResult:
    """Long-horizon trajectory optimization over the whole square.

    Every state of the returned trajectory is a waypoint for the cost.
    A time limit with no incumbent yields NO_PATH with ``detail`` set.
    """
    mode = ToMode(mode)
    t0 = time.perf_counter()
    problem = build_full_problem(sc, N)
    sol = solve_micp(problem, time_limit=time_limit, first_feasible=mode is ToMode.FIRST_FEASIBLE,
                     settings=settings)
    wall = time.perf_counter() - t0
    counters = {"bnb_nodes": sol.stats.nodes_explored, "qp_solves": sol.stats.qp_solves,
                "leaf_nodes": sol.stats.leaf_nodes, "n_binaries": problem.n_binaries}
    name = f"to_{mode.value}"
    if sol.primal is None:
        return BaselineResult(name, SearchStatus.NO_PATH, np.inf, wall, counters, detail=sol.status.value)
    traj = Trajectory.from_primal(problem.layout, sol.primal, sol.objective)
    mask = np.ones(len(traj.states), dtype=bool)
    return BaselineResult(name, SearchStatus.FOUND, path_cost(traj.states), wall, counters, traj.states,
                          traj.inputs, mask, sol.objective, sol.status.value)


@dataclass
class OracleResult:
    status: SearchStatus
    cost: float
    voxels: list[VoxelId]
    graph: VoxelGraph
    vertex_solves: int
    edge_solves: int
    wall_time: float
    counters: SearchCounters | None = None

    @property
    def found(self) -> bool:
        return self.status is SearchStatus.FOUND


def prevalidate(sc: Scenario, grid: GridSpec, graph: VoxelGraph, counters: SearchCounters,
                settings: QpSettings | None = None) -> None:
    """Fill every vertex record of ``graph`` (start and goal voxels get the exact states)."""
    graph.set_vertex(grid.voxel_of(sc.start_state), sc.start_state)
    graph.set_vertex(grid.voxel_of(sc.goal_state), sc.goal_state)
    solver = _Solver(sc, graph, 1, False, counters, settings)
    for vid in grid.voxels():
        solver.vertex(vid)


def _at_rest(conf) -> bool:
    return not np.any(conf[2:])


def full_eval_oracle(sc: Scenario, grid: GridSpec, N_edge: int = 7,
                     settings: QpSettings | None = None) -> OracleResult:
    """Solve every vertex and edge, then run Dijkstra with edge cost ``c``.

    Edges between two configurations at rest are solved once per unordered
    pair: reversing a trajectory in time (velocities negated) maps feasible
    solutions of one direction onto the other, and ``c`` is symmetric. Pairs
    with a moving endpoint are solved in both directions.
    """
    t0 = time.perf_counter()
    counters = SearchCounters()
    graph = VoxelGraph(grid, symmetric_edges=False)
    prevalidate(sc, grid, graph, counters, settings)
    solver = _Solver(sc, graph, N_edge, False, counters, settings)
    G = nx.DiGraph()
    for a in grid.voxels():
        ra = graph.vertex(a)
        if ra.status is not VertexStatus.VALIDATED:
            continue
        G.add_node(a)
        for b in neighbors(grid, a):
            rb = graph.vertex(b)
            if rb.status is not VertexStatus.VALIDATED:
                continue
            symmetric = _at_rest(ra.configuration) and _at_rest(rb.configuration)
            if symmetric and b < a:
                continue
            rec, _ = solver.edge(a, b)
            if rec.status is EdgeStatus.SOLVED:
                G.add_edge(a, b, weight=rec.cost)
                if symmetric:
                    G.add_edge(b, a, weight=rec.cost)
    start_v, goal_v = grid.voxel_of(sc.start_state), grid.voxel_of(sc.goal_state)
    wall = time.perf_counter() - t0
    try:
        total, path = nx.single_source_dijkstra(G, start_v, goal_v, weight="weight")
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return OracleResult(SearchStatus.NO_PATH, np.inf, [], graph, counters.vertex_solves,
                            counters.edge_solves, wall, counters)
    return OracleResult(SearchStatus.FOUND, float(total), list(path), graph, counters.vertex_solves,
                        counters.edge_solves, wall, counters)


def lwa_star(sc: Scenario, grid: GridSpec, N_edge: int = 7, warm_start_enabled: bool = False,
             settings: QpSettings | None = None) -> BaselineResult:
    """Lazy weighted A* (weight 1) over a graph whose vertices are validated up front.

    Edges are solved only when a node reached through them is popped.
    """
    t0 = time.perf_counter()
    pre = SearchCounters()
    graph = VoxelGraph(grid)
    prevalidate(sc, grid, graph, pre, settings)
    res = lto_plan(sc, grid, CostConfig(0.0), warm_start_enabled, N_edge, graph=graph, settings=settings)
    c = res.counters
    c.vertex_solves += pre.vertex_solves
    c.bnb_nodes += pre.bnb_nodes
    c.qp_solves += pre.qp_solves
    c.solves[:0] = pre.solves
    res.wall_time = time.perf_counter() - t0
    return from_search("lwa_star", res)


def weighted_a_star(sc: Scenario, grid: GridSpec, N_edge: int = 7, heuristic_weight: float = 1.0,
                    settings: QpSettings | None = None) -> BaselineResult:
    """Weighted A* with eager edge evaluation on expansion, vertices validated up front."""
    if heuristic_weight < 1.0:
        raise ValueError("heuristic weight must be >= 1")
    t0 = time.perf_counter()
    counters = SearchCounters()
    graph = VoxelGraph(grid)
    prevalidate(sc, grid, graph, counters, settings)
    solver = _Solver(sc, graph, N_edge, False, counters, settings)
    goal = sc.goal_state
    start_v, goal_v = grid.voxel_of(sc.start_state), grid.voxel_of(goal)
    tie = itertools.count()
    g = {start_v: 0.0}
    parent: dict[VoxelId, VoxelId | None] = {start_v: None}
    open_q = [(heuristic_weight * heuristic(sc.start_state, goal), 0.0, start_v, next(tie))]
    closed: set[VoxelId] = set()
    found = start_v == goal_v
    while open_q and not found:
        _, gv, vid, _ = heapq.heappop(open_q)
        counters.pops += 1
        if vid in closed or gv > g[vid]:
            counters.closed_skips += 1
            continue
        if vid == goal_v:
            found = True
            break
        closed.add(vid)
        counters.expansions += 1
        conf = graph.vertex(vid).configuration
        for nb in neighbors(grid, vid):
            rec_v = graph.vertex(nb)
            if nb in closed or rec_v.status is not VertexStatus.VALIDATED:
                continue
            rec, _ = solver.edge(vid, nb)
            if rec.status is not EdgeStatus.SOLVED:
                continue
            gn = gv + rec.cost
            if gn < g.get(nb, np.inf):
                g[nb] = gn
                parent[nb] = vid
                h = heuristic(rec_v.configuration, goal)
                heapq.heappush(open_q, (gn + heuristic_weight * h, gn, nb, next(tie)))
    wall = time.perf_counter() - t0
    name = "weighted_a_star"
    if not found:
        return BaselineResult(name, SearchStatus.NO_PATH, np.inf, wall, counters.as_row(), search_counters=counters)
    chain = [goal_v]
    while parent[chain[-1]] is not None:
        chain.append(parent[chain[-1]])
    chain.reverse()
    edges = [graph.check_same_pair(a, b) for a, b in zip(chain, chain[1:])]
    if not edges:
        states = sc.start_state.reshape(1, 4)
        inputs = np.zeros((0, 2))
    else:
        states = np.vstack([edges[0].trajectory.states] + [e.trajectory.states[1:] for e in edges[1:]])
        inputs = np.vstack([e.trajectory.inputs for e in edges])
    mask = np.zeros(len(states), dtype=bool)
    mask[0] = True
    k = 0
    for e in edges:
        k += e.trajectory.horizon
        mask[k] = True
    total = float(sum(e.cost for e in edges))
    return BaselineResult(name, SearchStatus.FOUND, total, wall, counters.as_row(), states, inputs, mask,
                          search_counters=counters)
