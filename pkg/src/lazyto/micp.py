"""Best-first branch-and-bound for mixed-binary convex QPs."""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .qp import PreparedQp, QpSettings, QpSolution, QpStatus, QuadraticProgram, solve_qp, stack_dual

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6
PRUNE_TOL = 1e-9
# feasibility slack used when checking a rounded point without a QP solve
_COMPLETION_TOL = 1e-7


class MicpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"
    # first incumbent of a first-feasible run, optimality not proven
    FEASIBLE = "feasible"


class SolverError(RuntimeError):
    """A relaxation could not be resolved (iteration limit or unbounded)."""


class MalformedWarmStart(ValueError):
    pass


@dataclass
class MicpProblem:
    qp: QuadraticProgram
    binary_indices: tuple[int, ...] = ()
    label: Any = None
    layout: Any = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.binary_indices)
        if len(set(idx)) != len(idx):
            raise ValueError("binary indices must be distinct")
        if any(i < 0 or i >= self.qp.n for i in idx):
            raise ValueError("binary index out of range")
        self.binary_indices = idx
        if idx:
            lo = self.qp.lower.copy()
            hi = self.qp.upper.copy()
            b = np.array(idx)
            lo[b] = np.maximum(lo[b], 0.0)
            hi[b] = np.minimum(hi[b], 1.0)
            self.qp = self.qp.with_bounds(lo, hi)

    @property
    def n_binaries(self) -> int:
        return len(self.binary_indices)


@dataclass
class WarmStart:
    binaries: np.ndarray
    continuous_guess: np.ndarray | None = None


@dataclass
class BnbStats:
    nodes_explored: int = 0
    qp_solves: int = 0
    leaf_nodes: int = 0
    incumbent_updates: int = 0
    warm_start_used: bool = False
    warm_start_rejected: bool = False
    max_depth: int = 0
    wall_time: float = 0.0


@dataclass
class MicpSolution:
    status: MicpStatus
    primal: np.ndarray | None
    binaries: np.ndarray | None
    objective: float
    stats: BnbStats = field(default_factory=BnbStats)

    @property
    def feasible(self) -> bool:
        return self.primal is not None


@dataclass(order=True)
class _Node:
    key: tuple
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    depth: int = field(compare=False)
    parent_bound: float = field(compare=False)
    guess: np.ndarray | None = field(compare=False, default=None)
    dual: np.ndarray | None = field(compare=False, default=None)


def _check_relaxation(sol: QpSolution) -> None:
    if sol.status is QpStatus.ITER_LIMIT:
        raise SolverError("relaxation hit the iteration limit")
    if sol.status is QpStatus.DUAL_INFEASIBLE:
        raise SolverError("relaxation is unbounded")


def evaluate_incumbent(
    problem: MicpProblem, warm: WarmStart, settings: QpSettings | None = None,
    prepared: PreparedQp | None = None,
) -> tuple[float, np.ndarray] | None:
    """Solve ``problem`` with its binaries fixed to ``warm.binaries``.

    Returns ``(objective, primal)`` or None when that assignment is infeasible.
    """
    qp = problem.qp
    if problem.n_binaries == 0:
        sol = solve_qp(qp, warm.continuous_guess, settings)
    else:
        b = np.array(problem.binary_indices)
        z = np.round(np.asarray(warm.binaries, dtype=float))
        lo, hi = qp.lower.copy(), qp.upper.copy()
        lo[b] = z
        hi[b] = z
        sol = solve_qp(qp.with_bounds(lo, hi), warm.continuous_guess, settings, prepared=prepared)
    if sol.status is QpStatus.PRIMAL_INFEASIBLE:
        return None
    _check_relaxation(sol)
    return sol.objective, sol.primal


def _validate_warm(problem: MicpProblem, warm: WarmStart) -> bool:
    if len(np.asarray(warm.binaries).reshape(-1)) != problem.n_binaries:
        return False
    if warm.continuous_guess is not None and len(warm.continuous_guess) != problem.qp.n:
        return False
    return True


class _Completion:
    """Rounds a relaxed point to a binary assignment without a QP solve.

    Each free binary is set to 1 when every inequality it tightens still holds
    at 1, otherwise 0; the rounded point is then checked against every row.
    """

    def __init__(self, problem: MicpProblem):
        qp = problem.qp
        self.qp = qp
        self.b = np.array(problem.binary_indices, dtype=int)
        Ain = qp.ineq_matrix
        self.Ain = Ain
        self.Aeq = qp.eq_matrix
        # rows in which each binary appears with a positive coefficient
        self.tight_rows = [np.flatnonzero(Ain[:, j] > 0) for j in self.b]
        self.touching = [np.flatnonzero((Ain[:, j] != 0)) for j in self.b]

    def __call__(self, x: np.ndarray, free: np.ndarray):
        """Return ``(point, violated_binary_positions)``; point is None on failure."""
        p = x.copy()
        fb = self.b[free]
        p[fb] = 0.0
        p[self.b[~free]] = np.round(p[self.b[~free]])
        Ax = self.Ain @ p
        order = np.argsort(-x[fb], kind="stable")
        for k in np.flatnonzero(free)[order]:
            j = self.b[k]
            rows = self.tight_rows[k]
            inc = self.Ain[rows, j]
            if np.all(Ax[rows] + inc <= self.qp.ineq_rhs[rows] + _COMPLETION_TOL):
                p[j] = 1.0
                Ax += self.Ain[:, j]
        bad_rows = np.flatnonzero(Ax > self.qp.ineq_rhs + _COMPLETION_TOL)
        eq_bad = self.Aeq.shape[0] and np.max(np.abs(self.Aeq @ p - self.qp.eq_rhs)) > _COMPLETION_TOL
        if bad_rows.size == 0 and not eq_bad:
            lo_ok = np.all(p >= self.qp.lower - _COMPLETION_TOL)
            hi_ok = np.all(p <= self.qp.upper + _COMPLETION_TOL)
            if lo_ok and hi_ok:
                return p, None
        bad = set(bad_rows.tolist())
        involved = [k for k in np.flatnonzero(free) if bad.intersection(self.touching[k].tolist())]
        return None, np.array(involved, dtype=int)


def _most_fractional(values: np.ndarray, candidates: np.ndarray) -> int | None:
    frac = np.abs(values[candidates] - np.round(values[candidates]))
    ok = frac > INTEGRALITY_TOL
    if not np.any(ok):
        return None
    cand = candidates[ok]
    dist = np.abs(values[cand] - 0.5)
    # lowest index among the closest to 0.5
    best = np.flatnonzero(dist <= np.min(dist) + 1e-12)
    return int(cand[best[0]])


def solve_micp(
    problem: MicpProblem,
    warm: WarmStart | None = None,
    time_limit: float = np.inf,
    first_feasible: bool = False,
    settings: QpSettings | None = None,
) -> MicpSolution:
    """Solve a mixed-binary convex QP to global optimality.

    Nodes are explored best-first on their parent's relaxation bound (ties go
    to the deeper node, then to insertion order). Branching picks the most
    fractional binary among those involved in constraints a rounded completion
    of the relaxation violates, falling back to all fractional binaries.

    Parameters
    ----------
    warm : WarmStart, optional
        Binary assignment evaluated up front as an incumbent; its continuous
        guess seeds the root relaxation. Malformed warm starts are ignored
        (``stats.warm_start_rejected``).
    first_feasible : bool
        Stop at the first incumbent instead of proving optimality.
    """
    t0 = time.perf_counter()
    stats = BnbStats()
    qp = problem.qp

    if warm is not None and not _validate_warm(problem, warm):
        logger.warning("ignoring malformed warm start for %s", problem.label)
        stats.warm_start_rejected = True
        warm = None

    if problem.n_binaries == 0:
        guess = warm.continuous_guess if warm is not None else None
        stats.warm_start_used = warm is not None
        sol = solve_qp(qp, guess, settings)
        stats.qp_solves = stats.nodes_explored = stats.leaf_nodes = 1
        stats.wall_time = time.perf_counter() - t0
        if sol.status is QpStatus.PRIMAL_INFEASIBLE:
            return MicpSolution(MicpStatus.INFEASIBLE, None, None, np.inf, stats)
        _check_relaxation(sol)
        stats.incumbent_updates = 1
        return MicpSolution(MicpStatus.OPTIMAL, sol.primal, np.zeros(0), sol.objective, stats)

    b = np.array(problem.binary_indices, dtype=int)
    prepared = PreparedQp(qp, settings)
    completion = _Completion(problem)
    best_obj, best_x = np.inf, None

    if warm is not None:
        stats.warm_start_used = True
        stats.qp_solves += 1
        inc = evaluate_incumbent(problem, warm, settings, prepared)
        if inc is not None:
            best_obj, best_x = inc
            stats.incumbent_updates += 1

    counter = itertools.count()
    root_guess = warm.continuous_guess if warm is not None else None
    heap = [_Node((-np.inf, 0, next(counter)), qp.lower.copy(), qp.upper.copy(), 0, -np.inf, root_guess)]
    timed_out = False

    while heap:
        if first_feasible and best_x is not None:
            break
        if time.perf_counter() - t0 > time_limit:
            timed_out = True
            break
        node = heapq.heappop(heap)
        if node.parent_bound >= best_obj - PRUNE_TOL:
            continue
        sol = solve_qp(qp.with_bounds(node.lower, node.upper), node.guess, settings,
                       initial_dual=node.dual, prepared=prepared)
        stats.nodes_explored += 1
        stats.qp_solves += 1
        stats.max_depth = max(stats.max_depth, node.depth)
        if sol.status is QpStatus.PRIMAL_INFEASIBLE:
            stats.leaf_nodes += 1
            continue
        _check_relaxation(sol)
        bound = sol.objective
        if bound >= best_obj - PRUNE_TOL:
            stats.leaf_nodes += 1
            continue
        x = sol.primal
        free = node.lower[b] < node.upper[b]
        point, involved = completion(x, free)
        if point is not None:
            obj = qp.objective(point)
            if obj < best_obj:
                best_obj, best_x = obj, point
                stats.incumbent_updates += 1
            if obj <= bound + PRUNE_TOL:
                stats.leaf_nodes += 1
                continue
        pos = None
        if involved is not None and involved.size:
            pos = _most_fractional(x[b], involved)
        if pos is None:
            pos = _most_fractional(x[b], np.flatnonzero(free))
        if pos is None:
            # integral relaxation (a completion with the same binaries failed
            # only through rounding tolerance) or nothing left to branch on
            stats.leaf_nodes += 1
            if qp.violation(x) <= 1e-6 and bound < best_obj:
                best_obj, best_x = bound, x
                stats.incumbent_updates += 1
            continue
        j = b[pos]
        dual = stack_dual(qp, sol)
        for val in (1.0, 0.0):
            lo, hi = node.lower.copy(), node.upper.copy()
            lo[j] = hi[j] = val
            heapq.heappush(heap, _Node((bound, -(node.depth + 1), next(counter)), lo, hi,
                                       node.depth + 1, bound, x, dual))

    stats.wall_time = time.perf_counter() - t0
    if best_x is None:
        status = MicpStatus.TIME_LIMIT if timed_out else MicpStatus.INFEASIBLE
        return MicpSolution(status, None, None, np.inf, stats)
    if timed_out:
        status = MicpStatus.TIME_LIMIT
    elif heap:
        status = MicpStatus.FEASIBLE
    else:
        status = MicpStatus.OPTIMAL
    z = np.round(best_x[b])
    best_x = best_x.copy()
    best_x[b] = z
    return MicpSolution(status, best_x, z, best_obj, stats)
