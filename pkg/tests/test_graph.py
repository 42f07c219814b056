import numpy as np
import pytest

from lazyto.graph import (EdgeStatus, GridSpec, NotNeighbors, Trajectory, VoxelGraph, are_neighbors,
                          edge_region, neighbors)
from lazyto.scenario import Region, Scenario, TrajectoryLayout
from lazyto.validate import validate_trajectory


def test_neighbor_counts():
    g = GridSpec(4)
    assert len(neighbors(g, (1, 1))) == 8
    assert len(neighbors(g, (0, 0))) == 3
    assert len(neighbors(GridSpec(5, i=2), (2, 2))) == 24
    assert g.n_vertices == 16
    assert are_neighbors(g, (0, 0), (1, 1)) and not are_neighbors(g, (0, 0), (2, 0))


def test_edge_region():
    g = GridSpec(4)
    assert edge_region(g, (0, 0), (1, 0)) == Region(0, 0, 0.5, 0.25)
    assert edge_region(g, (2, 3), (2, 3)) == g.box((2, 3))
    r = edge_region(g, (0, 0), (1, 1))
    assert r == Region(0, 0, 0.5, 0.5)
    inside = [v for v in g.voxels() if r.contains(g.box(v).center, tol=0)]
    assert len(inside) == 4
    with pytest.raises(NotNeighbors):
        edge_region(g, (0, 0), (2, 0))


def test_voxel_of():
    g = GridSpec(4)
    assert g.voxel_of([0.0, 0.0]) == (0, 0)
    assert g.voxel_of([1.0, 1.0]) == (3, 3)
    assert g.voxel_of([0.3, 0.6]) == (1, 2)


def _traj(a, b, N=4):
    a, b = np.asarray(a, float), np.asarray(b, float)
    st = np.array([a + (b - a) * t / N for t in range(N + 1)])
    st[:, 2:] = 0.0
    return Trajectory(st, np.zeros((N, 2)), {(0, t): (1, 0, 0, 0) for t in range(1, N + 1)}, 1.0)


def test_cache_lookups():
    g = VoxelGraph(GridSpec(4))
    assert g.check_same_pair((0, 0), (1, 0)) is None
    assert g.check_same_vertex((0, 0)) is None
    t = _traj([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0])
    g.set_edge((0, 0), (1, 0), t, 0.3)
    rec = g.check_same_pair((0, 0), (1, 0))
    assert rec.trajectory is t and rec.cost == 0.3
    assert g.check_same_pair((1, 0), (0, 0)) is None
    g.set_vertex((2, 2), None)
    assert g.check_same_vertex((2, 2)).configuration is None


def test_symmetric_reversal():
    g = VoxelGraph(GridSpec(4), symmetric_edges=True)
    t = _traj([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0])
    t.states[1:-1, 2] = 0.3
    g.set_edge((0, 0), (1, 0), t, 0.3)
    rec = g.check_same_pair((1, 0), (0, 0))
    assert rec.reversed_from_cache
    np.testing.assert_allclose(rec.trajectory.states[0], t.states[-1])
    np.testing.assert_allclose(rec.trajectory.states[:, 2], -t.states[::-1, 2])
    # timestep t of the donor becomes N - t
    assert set(rec.trajectory.binaries) == {(0, k) for k in range(0, 4)}
    assert rec.trajectory.binaries[(0, 0)] == t.binaries[(0, 4)]


def test_reversal_preserves_dynamics():
    sc = Scenario([], [0.1, 0.1, 0, 0], [0.9, 0.9, 0, 0])
    rng = np.random.default_rng(0)
    dyn = sc.dynamics
    x = np.array([0.5, 0.5, 0.1, -0.1])
    st, us = [x], []
    for _ in range(6):
        u = rng.uniform(-0.5, 0.5, 2)
        x = dyn.A @ x + dyn.B @ u
        st.append(x)
        us.append(u)
    rev = Trajectory(np.array(st), np.array(us)).reversed()
    assert validate_trajectory(sc, rev.states, rev.inputs).dynamics_residual <= 1e-12


def test_warm_start_lookup():
    g = VoxelGraph(GridSpec(4))
    layout = TrajectoryLayout(4, tuple((0, t, f) for t in range(1, 5) for f in range(4)))
    assert g.find_warm_start([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0], 0.1, layout) is None
    far = _traj([0.15, 0.1, 0, 0], [0.43, 0.1, 0, 0])       # d_cost 0.08
    near = _traj([0.1, 0.1, 0, 0], [0.45, 0.1, 0, 0])       # d_cost 0.05
    g.set_edge((0, 0), (1, 0), far, 1.0)
    g.set_edge((0, 1), (1, 1), near, 1.0)
    ws = g.find_warm_start([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0], 0.1, layout)
    np.testing.assert_allclose(ws.continuous_guess[:4], near.states[0])
    exact = g.find_warm_start(near.states[0], near.states[-1], 0.1, layout)
    assert exact is not None
    assert g.find_warm_start([0.9, 0.9, 0, 0], [0.9, 0.9, 0, 0], 0.1, layout) is None


def test_warm_start_missing_binaries_default_to_one():
    t = _traj([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0])
    layout = TrajectoryLayout(4, ((0, 1, 0), (0, 1, 1), (3, 2, 2)))
    ws = t.warm_start(layout)
    assert ws.binaries.tolist() == [1.0, 0.0, 1.0]
    assert ws.continuous_guess is not None
    assert t.warm_start(TrajectoryLayout(5, ())).continuous_guess is None


def test_dump_csv(tmp_path):
    g = VoxelGraph(GridSpec(4))
    g.set_vertex((0, 0), [0.1, 0.1, 0, 0])
    g.set_edge((0, 0), (1, 0), _traj([0.1, 0.1, 0, 0], [0.4, 0.1, 0, 0]), 0.3)
    g.set_edge((1, 0), (2, 0), None)
    v, e = g.dump_csv(tmp_path)
    assert v.read_text().splitlines()[1].startswith("0,0,validated")
    lines = e.read_text().splitlines()
    assert lines[1] == "0,0,1,0,solved,0.3"
    assert lines[2].endswith(",")
    assert g.n_solved_edges() == 1
    assert [r.status for r in g.edges] == [EdgeStatus.SOLVED, EdgeStatus.INFEASIBLE]
