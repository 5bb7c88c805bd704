import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prongsuf.contacts import ReducedSystem, Scenario, assemble, reduce
from prongsuf.model import RobotState
from prongsuf.robots import fixture_suf, quadruped, single_body
from prongsuf.suf import (METHODS, ORIGIN_INFEASIBLE, UNBOUNDED, DecisionRule, SufResult,
                          affine_problem, certified_radius, compute_suf, max_quadratic_on_ball,
                          replay_certificate, sample_ball, suf_affine, suf_exact, suf_fibonacci,
                          suf_quadratic, suf_single)

FIXTURE_RHO = 32.70
FEET = ("LF_foot", "RF_foot", "LH_foot", "RH_foot")


def box_with_recourse():
    """|F_x| <= 1 + dQ with |dQ| <= 0.5, |F_y| <= 1.5, |F_z| <= 2: radius 1.5 with recourse."""
    A = np.array([[1, 0, 0, -1], [-1, 0, 0, -1], [0, 1, 0, 0], [0, -1, 0, 0],
                  [0, 0, 1, 0], [0, 0, -1, 0], [0, 0, 0, 1], [0, 0, 0, -1]], dtype=float)
    b = np.array([1, 1, 1.5, 1.5, 2, 2, 0.5, 0.5])
    return ReducedSystem.from_halfspaces(A, b, n_free=1)


def test_fixture_closed_form_value():
    assert fixture_suf() == pytest.approx(FIXTURE_RHO, rel=2e-4)
    k = np.sqrt(2) / 2 * 0.5
    assert fixture_suf() == pytest.approx(k * 98.1 / np.sqrt(1 + k * k), rel=1e-14)


@pytest.mark.parametrize("method", ["exact", "fibonacci", "affine", "quadratic"])
def test_fixture_all_methods(fixture_reduced, method):
    res = compute_suf(fixture_reduced, method)
    assert res.status == "ok"
    assert res.rho == pytest.approx(FIXTURE_RHO, rel=5e-3)
    assert res.rho <= fixture_suf() + 1e-8


def test_fixture_exact_to_closed_form(fixture_reduced):
    assert suf_exact(fixture_reduced).rho == pytest.approx(fixture_suf(), abs=1e-8)


def test_fixture_fibonacci_below_by_at_most_two_percent(fixture_reduced):
    rho = suf_fibonacci(fixture_reduced).rho
    assert 0.98 * fixture_suf() <= rho <= fixture_suf() + 1e-9


def test_fixture_single_directions(fixture_reduced):
    k = np.sqrt(2) / 2 * 0.5
    up = suf_single(fixture_reduced, (0, 0, 1))
    assert up.rho == pytest.approx(98.1, abs=1e-8)
    side = suf_single(fixture_reduced, (1, 0, 0))
    assert side.rho == pytest.approx(k * 98.1, abs=1e-8)
    assert side.rho == pytest.approx(34.68, abs=5e-3)
    down = suf_single(fixture_reduced, (0, 0, -1))
    assert down.status == UNBOUNDED and down.rho == np.inf
    worst = np.array([1.0, 0.0, k]) / np.hypot(1.0, k)
    assert suf_single(fixture_reduced, worst).rho == pytest.approx(fixture_suf(), abs=1e-8)


def test_single_rejects_non_unit_direction(fixture_reduced):
    with pytest.raises(ValueError):
        suf_single(fixture_reduced, (1, 1, 0))


def test_fibonacci_refines_with_more_samples(fixture_reduced):
    assert suf_fibonacci(fixture_reduced, 4).rho < suf_fibonacci(fixture_reduced, 1024).rho
    coarse = [suf_fibonacci(fixture_reduced, n).rho for n in (8, 64, 512)]
    assert all(r <= fixture_suf() + 1e-9 for r in coarse)


def test_box_exact_and_fibonacci_on_facet_normals():
    box = ReducedSystem.from_halfspaces(np.vstack([np.eye(3), -np.eye(3)]),
                                        np.array([1.0, 2, 3, 4, 5, 6]))
    assert suf_exact(box).rho == pytest.approx(1.0, abs=1e-8)
    assert suf_affine(box).rho == pytest.approx(1.0, abs=1e-8)
    assert suf_fibonacci(box).rho == pytest.approx(1.0, abs=1e-8)


def test_recourse_box_all_methods_agree():
    red = box_with_recourse()
    for method in ("exact", "fibonacci", "affine", "quadratic"):
        assert compute_suf(red, method).rho == pytest.approx(1.5, abs=1e-6), method


def test_empty_rfp_is_zero_everywhere(pronged_stance):
    model, state = pronged_stance
    weak = model.scaled(torque_scale=0.0)
    red = reduce(assemble(weak, state, Scenario(FEET, "arm_tip")))
    for method in METHODS:
        res = compute_suf(red, method)
        assert res.rho == 0.0, method
        assert res.status == ORIGIN_INFEASIBLE, method
        assert res.polytope is None


def test_zero_friction_fixture_is_degenerate():
    model = single_body(mu=0.0)
    red = reduce(assemble(model, RobotState.zero(model), Scenario(["ground"], "handle")))
    for method in ("exact", "fibonacci", "affine", "quadratic"):
        res = compute_suf(red, method)
        assert res.rho == 0.0
        assert res.status == "degenerate", method


def test_exact_matches_dense_fibonacci_on_teleoperation(teleoperation_instance):
    red = teleoperation_instance[3]
    assert red.n_free <= 3
    exact = suf_exact(red).rho
    dense = suf_fibonacci(red, 20000).rho
    assert exact > 0
    assert abs(dense - exact) <= 5e-3 * exact
    assert dense <= exact + 1e-6


def test_exact_algorithms_agree(teleoperation_instance):
    red = teleoperation_instance[3]
    a = suf_exact(red, algorithm="vertex")
    b = suf_exact(red, algorithm="projection")
    assert a.rho == pytest.approx(b.rho, rel=1e-7)


def test_exact_vertex_budget_reported(teleoperation_instance):
    red = teleoperation_instance[3]
    res = suf_exact(red, algorithm="vertex", vertex_budget=3)
    assert res.status == "budget-exceeded"
    assert np.isnan(res.rho)


def test_conservativity_chain(manipulation_instance):
    red = manipulation_instance[3]
    exact = suf_exact(red).rho
    fib = suf_fibonacci(red).rho
    aff = suf_affine(red).rho
    quad = suf_quadratic(red).rho
    assert fib <= exact + 1e-6
    assert aff <= quad + 1e-6 <= exact + 2e-6
    rng = np.random.default_rng(0)
    for d in rng.normal(size=(20, 3)):
        assert suf_single(red, d / np.linalg.norm(d)).rho >= exact - 1e-6


def test_quadratic_with_zero_terms_matches_affine(manipulation_instance):
    red = manipulation_instance[3]
    aff = suf_affine(red).rho
    fixed = suf_quadratic(red, fix_quadratic_zero=True)
    assert fixed.rho == pytest.approx(aff, abs=1e-6)
    assert np.max(np.abs(fixed.certificate.quadratic)) < 1e-12


@pytest.mark.parametrize("method", ["affine", "quadratic"])
def test_certificate_replay(manipulation_instance, method):
    model, state, system, red = manipulation_instance
    res = compute_suf(red, method)
    assert res.rho > 0
    assert replay_certificate(red, res, 1000, seed=1) < 1e-7
    assert replay_certificate(red, res, 1000, seed=2, system=system) < 1e-6


def test_replay_needs_certificate(fixture_reduced):
    with pytest.raises(ValueError):
        replay_certificate(fixture_reduced, suf_exact(fixture_reduced))


def test_certified_radius_of_solver_law(manipulation_instance):
    red = manipulation_instance[3]
    res = suf_affine(red)
    assert res.rho <= res.info["solver_rho"] + 1e-9
    assert res.rho >= res.info["solver_rho"] * (1 - 1e-6)
    assert certified_radius(red, res.certificate, 10 * res.rho) == pytest.approx(res.rho, rel=1e-6)


def test_affine_problem_layout(manipulation_instance):
    red = manipulation_instance[3]
    p = affine_problem(red)
    assert p.layout["offset"].stop - p.layout["offset"].start == red.n_free
    assert p.layout["gain"].stop - p.layout["gain"].start == 3 * red.n_free


@pytest.mark.parametrize("s", [0.5, 2.0, 3.7])
def test_scale_covariance_on_fixture(s):
    base = single_body()
    scaled = base.scaled(torque_scale=s, gravity_scale=s)
    sc = Scenario(["ground"], "handle")
    r0 = reduce(assemble(base, RobotState.zero(base), sc))
    r1 = reduce(assemble(scaled, RobotState.zero(scaled), sc))
    for method in ("exact", "fibonacci", "affine", "quadratic"):
        assert compute_suf(r1, method).rho == pytest.approx(s * compute_suf(r0, method).rho,
                                                             rel=1e-7), method
    assert suf_single(r1, (1, 0, 0)).rho == pytest.approx(s * suf_single(r0, (1, 0, 0)).rho)


def brute_quadratic_on_ball(Q, g, r, rng, n=40000):
    x = rng.normal(size=(n, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= r * rng.uniform(0, 1, size=(n, 1)) ** (1 / 3)
    x = np.vstack([x, x / np.linalg.norm(x, axis=1, keepdims=True) * r])
    return np.max(np.einsum("ni,ij,nj->n", x, Q, x) + x @ g)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 3.0))
def test_property_trust_region_maximum(seed, r):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(3, 3))
    Q = X + X.T
    g = rng.normal(size=3)
    exact = max_quadratic_on_ball(Q, g, r)
    sampled = brute_quadratic_on_ball(Q, g, r, rng)
    assert exact >= sampled - 1e-9
    assert exact <= sampled + 0.05 * max(1.0, abs(exact))


def test_trust_region_hard_case():
    # gradient orthogonal to the top eigenvector
    Q = np.diag([1.0, -1.0, -2.0])
    g = np.array([0.0, 1.0, 0.0])
    assert max_quadratic_on_ball(Q, g, 1.0) == pytest.approx(1.0 + 0.5 ** 2 / 2, abs=1e-9)


def test_sample_ball_radius():
    pts = sample_ball(500, 2.0, np.random.default_rng(0))
    norms = np.linalg.norm(pts, axis=1)
    assert np.all(norms <= 2.0 + 1e-12)
    assert np.sum(np.isclose(norms, 2.0)) >= 200


def test_result_json_round_trip(manipulation_instance):
    red = manipulation_instance[3]
    for res in (suf_quadratic(red), suf_exact(red), suf_single(red, (0, 1, 0))):
        doc = json.loads(res.to_json())
        again = SufResult.from_dict(doc)
        assert again.to_json() == res.to_json()
    quad = SufResult.from_dict(json.loads(suf_quadratic(red).to_json()))
    assert replay_certificate(red, quad) < 1e-7


def test_decision_rule_recourse():
    W = np.zeros((2, 3, 3))
    W[0] = np.eye(3)
    rule = DecisionRule(np.array([1.0, 2.0]), np.array([[1.0, 0, 0], [0, 1.0, 0]]), W)
    np.testing.assert_allclose(rule.recourse([1.0, 2.0, 3.0]), [1 + 1 + 14, 2 + 2])
    assert DecisionRule.from_dict(rule.to_dict()).to_dict() == rule.to_dict()


def test_unknown_method(fixture_reduced):
    with pytest.raises(ValueError):
        compute_suf(fixture_reduced, "bisection")


def test_quadruped_without_arm_prong_load():
    # the prong as a load point: no joints between base and point
    model = quadruped(arm=False)
    from prongsuf.robots import standing_state
    state = standing_state(model, height=0.45, tol=1e-9, max_iter=5000)
    red = reduce(assemble(model, state, Scenario(FEET, "prong_front")))
    aff, exact = suf_affine(red).rho, suf_exact(red).rho
    assert 0 < aff <= exact + 1e-6


def test_ray_endpoints_stay_inside_after_warm_starts():
    # this posture used to leave warm-started rays 2.5e-6 outside a row
    from prongsuf.cli.bench import sample_instance, scenario_for, scenario_model
    from prongsuf.geometry import fibonacci_sphere
    from prongsuf.suf import RayShooter
    model = scenario_model("teleoperation")
    state = sample_instance(model, "teleoperation", 1163)
    red = reduce(assemble(model, state, scenario_for("teleoperation")))
    shooter = RayShooter(red)
    assert shooter.origin_feasible()
    A, b = red.normalized_halfspaces()
    worst = 0.0
    for d in fibonacci_sphere(1024):
        shooter.shoot(d)
        worst = max(worst, float(np.max(A @ shooter.last_point - b)))
    assert worst <= 1e-9
    assert suf_fibonacci(red).rho <= suf_exact(red).rho + 1e-9
