import numpy as np
import pytest

from prongsuf.design import DesignVariables, design_model
from prongsuf.hqp import (HqpInfeasible, TaskSet, build_problem, pd_acceleration, solve_hqp,
                          verify_solution)
from prongsuf.model import RobotState, contact_jacobians, dynamics_bias, point_jacobian
from prongsuf.robots import quadruped, standing_state

FEET = ("LF_foot", "RF_foot", "LH_foot", "RH_foot")
PRONGS = ("prong_front", "prong_hind")
ALL_BUT_3 = (1, 2, 4, 5)


@pytest.fixture(scope="module")
def legs():
    model = quadruped(arm=False)
    state = standing_state(model, height=0.45, tol=1e-10, max_iter=5000)
    return model, state


@pytest.fixture(scope="module")
def grounded():
    model = design_model(quadruped(arm=False), DesignVariables(0.3, 0.2, 0.45))
    state = standing_state(model, height=0.45, tol=1e-10, max_iter=5000)
    return model, state


def static_oracle(model, state, contacts):
    """Minimum-norm torques with q'' = 0: B tau + Jc' lambda = h, |tau| minimal."""
    h = dynamics_bias(model, state)
    Jc = contact_jacobians(model, state, contacts)
    nj = model.n_joints
    B = model.selection_matrix()
    W = np.hstack([B, Jc.T])
    # parametrise the solution set and minimise |tau|^2 over it
    x0, *_ = np.linalg.lstsq(W, h, rcond=None)
    _, s, Vt = np.linalg.svd(W)
    N = Vt[int(np.sum(s > 1e-10 * s[0])):].T
    y, *_ = np.linalg.lstsq(N[:nj], -x0[:nj], rcond=None)
    x = x0 + N @ y
    return x[:nj], x[nj:]


def test_pd_acceleration():
    np.testing.assert_allclose(pd_acceleration([0.1, 0, 0], [0, 1, 0]), [10.0, -20.0, 0.0])


def test_task_set_validation_and_json():
    with pytest.raises(ValueError):
        TaskSet(w_linear=-1.0)
    with pytest.raises(ValueError):
        TaskSet(kp=-1.0)
    tasks = TaskSet.tracking(angular_error=[0.1, 0, 0], swing_errors={"LF_foot": [0, 0, 0.05]},
                             w_torque=2.0)
    again = TaskSet.from_json(tasks.to_json())
    assert again.to_json() == tasks.to_json()
    np.testing.assert_allclose(again.swing["LF_foot"], [0, 0, 5.0])


def test_static_equilibrium_oracle(legs):
    model, state = legs
    sol = solve_hqp(model, state, FEET)
    tau, lam = static_oracle(model, state, FEET)
    np.testing.assert_allclose(sol.qddot, 0.0, atol=1e-6)
    np.testing.assert_allclose(sol.tau, tau, atol=1e-6)
    np.testing.assert_allclose(sol.lam, lam, atol=1e-6)


def test_layer_three_has_no_effect_with_prongs_grounded(grounded):
    model, state = grounded
    tasks = TaskSet(torso_angular=[0.3, -0.2, 0.1], torso_linear=[0.5, 0.2, -0.1])
    full = solve_hqp(model, state, FEET + PRONGS, tasks)
    without = solve_hqp(model, state, FEET + PRONGS, tasks, layers=ALL_BUT_3)
    assert 3 in full.skipped
    assert np.max(np.abs(full.x - without.x)) < 1e-7


def test_unreachable_linear_target_keeps_torques_bounded(grounded):
    model, state = grounded
    calm = solve_hqp(model, state, FEET + PRONGS, TaskSet())
    wild = solve_hqp(model, state, FEET + PRONGS, TaskSet(torso_linear=[50.0, -80.0, 30.0]))
    assert np.all(np.abs(wild.tau) <= model.torque_limits + 1e-7)
    assert np.max(np.abs(wild.x - calm.x)) < 1e-7


def test_layer_three_acts_without_prongs(legs):
    model, state = legs
    tasks = TaskSet(torso_linear=[0.2, 0.0, 0.1])
    full = solve_hqp(model, state, FEET, tasks)
    without = solve_hqp(model, state, FEET, tasks, layers=ALL_BUT_3)
    np.testing.assert_allclose(full.qddot[:3], [0.2, 0.0, 0.1], atol=1e-6)
    assert np.max(np.abs(full.x - without.x)) > 1e-3


def test_free_floating_zero_targets_need_no_torque():
    model = quadruped().scaled(gravity_scale=0.0)
    state = standing_state(quadruped(), height=0.45, tol=1e-6)
    sol = solve_hqp(model, state, ())
    np.testing.assert_allclose(sol.tau, 0.0, atol=1e-9)
    assert sol.lam.size == 0


def test_free_fall_with_only_feasibility_and_torque_layers():
    model = quadruped()
    state = standing_state(model, height=0.45, tol=1e-6)
    sol = solve_hqp(model, state, (), layers=(1, 5))
    np.testing.assert_allclose(sol.tau, 0.0, atol=1e-9)
    np.testing.assert_allclose(sol.qddot[:3], model.gravity, atol=1e-8)


def test_lexicographic_non_interference(legs):
    model, state = legs
    base = TaskSet(torso_angular=[1.0, -0.5, 0.2], torso_linear=[0.3, 0.1, 0.0])
    ref = solve_hqp(model, state, FEET, base)
    rng = np.random.default_rng(0)
    for _ in range(5):
        weights = rng.uniform(0.1, 10.0, model.n_joints)
        other = solve_hqp(model, state, FEET, TaskSet(base.torso_angular, base.torso_linear,
                                                      w_torque=weights))
        assert abs(other.objectives[2] - ref.objectives[2]) < 1e-6
        assert abs(other.objectives[3] - ref.objectives[3]) < 1e-6


def test_appending_layers_keeps_earlier_objectives(legs):
    model, state = legs
    tasks = TaskSet(torso_angular=[1.0, -0.5, 0.2], torso_linear=[0.3, 0.1, 0.0])
    short = solve_hqp(model, state, FEET, tasks, layers=(1, 2))
    full = solve_hqp(model, state, FEET, tasks)
    assert abs(short.objectives[2] - full.objectives[2]) <= 1e-6


def test_swing_foot_tracking():
    # a tripod holding the torso still saturates 40 N m joints, so give it room
    model = quadruped(arm=False).scaled(torque_scale=10.0)
    state = standing_state(model, height=0.45, tol=1e-9, max_iter=5000)
    stance = ("RF_foot", "LH_foot", "RH_foot")
    target = np.array([0.0, 0.0, 2.0])
    sol = solve_hqp(model, state, stance, TaskSet(swing={"LF_foot": target}))
    acc = point_jacobian(model, state, "LF_foot") @ sol.qddot
    # zero velocity: no bias term
    np.testing.assert_allclose(acc, target, atol=1e-6)
    assert verify_solution(model, state, sol) <= 1e-7


def test_solution_satisfies_hard_constraints(grounded):
    model, state = grounded
    sol = solve_hqp(model, state, FEET + PRONGS, TaskSet(torso_angular=[0.5, 0.0, 0.0]))
    assert verify_solution(model, state, sol) <= 1e-7
    for name in FEET + PRONGS:
        lam = sol.contact_force(name)
        assert lam[2] >= -1e-7
        assert np.hypot(lam[0], lam[1]) <= model.friction_mu * lam[2] + 1e-7


def test_swing_target_on_stance_contact_rejected(legs):
    model, state = legs
    with pytest.raises(ValueError):
        build_problem(model, state, FEET, TaskSet(swing={"LF_foot": [0, 0, 1.0]}))


def test_no_torque_means_infeasible(legs):
    model, state = legs
    with pytest.raises(HqpInfeasible):
        solve_hqp(model.scaled(torque_scale=0.0), state, FEET)


def test_velocity_terms_enter_the_contact_rows(legs):
    model, state = legs
    qdot = np.zeros(model.nv)
    qdot[3] = 0.5
    moving = RobotState(state.q, qdot, state.qddot_d)
    sol = solve_hqp(model, moving, FEET)
    assert verify_solution(model, moving, sol) <= 1e-7
    assert np.max(np.abs(sol.qddot)) > 1e-3


def test_solution_json(legs):
    model, state = legs
    doc = solve_hqp(model, state, FEET).to_dict()
    assert set(doc["lambda"]) == set(FEET)
    assert "feasibility" in doc["objectives"] and "torque" in " ".join(doc["objectives"])
