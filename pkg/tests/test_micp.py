import numpy as np
import pytest

from lazyto.micp import MicpProblem, MicpStatus, WarmStart, evaluate_incumbent, solve_micp
from lazyto.qp import QuadraticProgram

from oracles import enumerate_micp, random_miqp


def _pick_one_closest():
    """min (x - 0.3)^2 with x = z (one binary): optimum at z = 0."""
    qp = QuadraticProgram(np.diag([2.0, 0.0]), [-0.6, 0.0], [[1.0, -1.0]], [0.0], offset=0.09)
    return MicpProblem(qp, (1,))


def test_single_binary_rounds_down():
    sol = solve_micp(_pick_one_closest())
    assert sol.status is MicpStatus.OPTIMAL
    assert sol.binaries.tolist() == [0.0]
    assert sol.objective == pytest.approx(0.09, abs=1e-8)


def test_exclusive_choice():
    # x <= 1 unless z = 1, in which case x >= 2; minimize (x - 1.6)^2
    M = 10.0
    P = np.zeros((2, 2))
    P[0, 0] = 2.0
    qp = QuadraticProgram(P, [-3.2, 0.0], None, None,
                          [[1.0, -M], [-1.0, M]], [1.0, -2.0 + M], offset=1.6 ** 2)
    sol = solve_micp(MicpProblem(qp, (1,)))
    assert sol.status is MicpStatus.OPTIMAL
    assert sol.primal[0] == pytest.approx(2.0, abs=1e-7)
    assert sol.objective == pytest.approx(0.16, abs=1e-7)


def test_infeasible():
    qp = QuadraticProgram(np.eye(2), np.zeros(2), None, None, [[-1.0, -1.0], [1.0, 1.0]], [-1.5, 0.5])
    sol = solve_micp(MicpProblem(qp, (0, 1)))
    assert sol.status is MicpStatus.INFEASIBLE
    assert sol.primal is None and sol.objective == np.inf


def test_no_binaries():
    qp = QuadraticProgram(np.eye(1) * 2, [-2.0])
    sol = solve_micp(MicpProblem(qp))
    assert sol.status is MicpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-1.0, abs=1e-8)
    assert sol.stats.nodes_explored <= 1


def test_random_instances_match_enumeration():
    rng = np.random.default_rng(2024)
    n_infeasible = 0
    for _ in range(20):
        prob = random_miqp(rng)
        ref = enumerate_micp(prob)
        sol = solve_micp(prob)
        if ref is None:
            n_infeasible += 1
            assert sol.status is MicpStatus.INFEASIBLE
            continue
        assert sol.status is MicpStatus.OPTIMAL
        assert sol.objective == pytest.approx(ref[0], abs=1e-6, rel=1e-6)
        assert prob.qp.violation(sol.primal) <= 1e-6
        assert np.all(np.isin(sol.binaries, (0.0, 1.0)))
    assert n_infeasible < 20


def test_node_count_bound():
    rng = np.random.default_rng(7)
    for _ in range(15):
        prob = random_miqp(rng)
        sol = solve_micp(prob)
        nz = prob.n_binaries
        assert sol.stats.nodes_explored <= 2 ** (nz + 1) - 1
        assert sol.stats.leaf_nodes <= 2 ** nz


def test_optimal_warm_start_does_not_add_nodes():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(12):
        prob = random_miqp(rng, n_z=6)
        cold = solve_micp(prob)
        if cold.status is not MicpStatus.OPTIMAL:
            continue
        warm = solve_micp(prob, WarmStart(cold.binaries, cold.primal))
        assert warm.stats.warm_start_used
        assert warm.objective == pytest.approx(cold.objective, abs=1e-7)
        assert warm.stats.nodes_explored <= cold.stats.nodes_explored
        checked += 1
    assert checked >= 5


def test_infeasible_warm_start_is_neutral():
    prob = random_miqp(np.random.default_rng(1), n_c=4, n_z=4)
    cold = solve_micp(prob)
    bad = WarmStart(np.zeros(prob.n_binaries))  # violates the cover row
    assert evaluate_incumbent(prob, bad) is None
    warm = solve_micp(prob, bad)
    assert warm.status is cold.status
    assert warm.objective == pytest.approx(cold.objective, abs=1e-7)


def test_malformed_warm_start_ignored():
    prob = random_miqp(np.random.default_rng(1), n_c=4, n_z=4)
    sol = solve_micp(prob, WarmStart(np.zeros(3)))
    assert sol.stats.warm_start_rejected
    assert sol.status is MicpStatus.OPTIMAL


def test_first_feasible_returns_feasible_point():
    prob = random_miqp(np.random.default_rng(6), n_c=6, n_z=8)
    full = solve_micp(prob)
    quick = solve_micp(prob, first_feasible=True)
    assert quick.status in (MicpStatus.OPTIMAL, MicpStatus.FEASIBLE)
    assert quick.objective >= full.objective - 1e-7
    assert prob.qp.violation(quick.primal) <= 1e-6


def test_time_limit_zero():
    prob = random_miqp(np.random.default_rng(6), n_c=6, n_z=8)
    sol = solve_micp(prob, time_limit=0.0)
    assert sol.status in (MicpStatus.TIME_LIMIT, MicpStatus.OPTIMAL)


def test_bad_binary_indices():
    qp = QuadraticProgram(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        MicpProblem(qp, (0, 0))
    with pytest.raises(ValueError):
        MicpProblem(qp, (2,))


def test_deterministic():
    prob = random_miqp(np.random.default_rng(13), n_c=5, n_z=6)
    a, b = solve_micp(prob), solve_micp(prob)
    assert a.objective == b.objective
    assert a.stats.nodes_explored == b.stats.nodes_explored
    assert np.array_equal(a.binaries, b.binaries)
