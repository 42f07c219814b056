"""Lazy trajectory optimization: graph search over a voxel lattice whose
vertices and edges are produced on demand by mixed-integer trajectory
optimization."""

from .baselines import BaselineResult, ToMode, full_eval_oracle, full_to, lwa_star, weighted_a_star
from .graph import GridSpec, Trajectory, VoxelGraph, edge_region, neighbors
from .micp import MicpProblem, MicpSolution, MicpStatus, WarmStart, evaluate_incumbent, solve_micp
from .qp import QpSolution, QpStatus, QuadraticProgram, solve_eq_qp, solve_qp
from .scenario import (Obstacle, Region, Scenario, build_edge_problem, build_full_problem, build_vertex_problem,
                       count_binaries)
from .search import CostConfig, SearchResult, SearchStatus, cost, cost_to, heuristic, lto_plan, suboptimality_alpha
from .validate import validate_trajectory

__version__ = "0.1.0"
