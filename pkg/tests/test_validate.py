import numpy as np

from lazyto.scenario import Scenario
from lazyto.validate import validate_trajectory


def _rollout(sc, x0, inputs):
    dyn = sc.dynamics
    xs = [np.asarray(x0, float)]
    for u in inputs:
        xs.append(dyn.A @ xs[-1] + dyn.B @ u)
    return np.array(xs)


def test_valid_rollout():
    sc = Scenario([(0.6, 0.6, 0.8, 0.8)], [0.1, 0.1, 0, 0], [0.9, 0.9, 0, 0])
    us = np.array([[0.5, 0.2], [0.0, 0.0], [-0.5, -0.2]])
    rep = validate_trajectory(sc, _rollout(sc, sc.start_state, us), us)
    assert rep.ok and rep.failures() == []


def test_detects_each_failure():
    sc = Scenario([(0.4, 0.4, 0.6, 0.6)], [0.1, 0.1, 0, 0], [0.9, 0.9, 0, 0])
    us = np.zeros((2, 2))
    st = _rollout(sc, [0.2, 0.2, 0, 0], us)

    bad = st.copy()
    bad[1, :2] = [0.5, 0.5]
    rep = validate_trajectory(sc, bad, us)
    assert not rep.clearance_ok and not rep.dynamics_ok

    big = np.array([[1.5, 1.5], [0.0, 0.0]])  # |u| > 2 along a vertex direction
    rep = validate_trajectory(sc, _rollout(sc, [0.2, 0.2, 0, 0], big), big)
    assert rep.dynamics_ok and not rep.thrust_ok

    out = _rollout(sc, [0.99, 0.2, 0.9, 0], us)
    rep = validate_trajectory(sc, out, us)
    assert not rep.bounds_ok
    assert any("bounds" in f for f in rep.failures())


def test_touching_face_is_allowed():
    sc = Scenario([(0.4, 0.4, 0.6, 0.6)], [0.1, 0.1, 0, 0], [0.9, 0.9, 0, 0])
    st = np.array([[0.4, 0.5, 0, 0]])
    rep = validate_trajectory(sc, st, np.zeros((0, 2)))
    assert rep.min_clearance == 0.0 and rep.ok
