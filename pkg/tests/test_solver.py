import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prongsuf.solver import (INFEASIBLE, OPTIMAL, UNBOUNDED, ConeBlock, ConicProblem, LPModel,
                             solve, solve_lp, solve_qp, solve_sdp, solve_socp)


def nonneg(G, h):
    return ConeBlock("nonnegative", np.atleast_2d(G), np.atleast_1d(h))


def brute_force_lp(c, G, h):
    """Best objective over all basic points of ``G x <= h``."""
    n = len(c)
    best = -np.inf
    for rows in itertools.combinations(range(len(h)), n):
        sub = G[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-9:
            continue
        x = np.linalg.solve(sub, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            best = max(best, c @ x)
    return best


def test_lp_upper_bound():
    out = solve_lp(ConicProblem([1.0], (nonneg([[1.0]], [1.0]),)))
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(1.0, abs=1e-12)
    assert out.x is not None and out.solve_time >= 0


def test_lp_infeasible_and_unbounded():
    bad = ConicProblem([1.0], (nonneg([[-1.0], [1.0]], [-2.0, 1.0]),))
    out = solve_lp(bad)
    assert out.status == INFEASIBLE and out.x is None
    assert solve_lp(ConicProblem([1.0], (nonneg([[-1.0]], [0.0]),))).status == UNBOUNDED


def test_lp_rejects_cones():
    p = ConicProblem([1.0, 0.0], (ConeBlock("second_order", -np.eye(2), np.zeros(2)),))
    with pytest.raises(ValueError):
        solve_lp(p)


def test_lp_with_equality_rows():
    p = ConicProblem([1.0, 1.0], (nonneg(np.eye(2), [3.0, 5.0]),),
                     A_eq=[[1.0, -1.0]], b_eq=[0.0])
    out = solve(p)
    assert out.objective == pytest.approx(6.0)
    np.testing.assert_allclose(out.x, [3.0, 3.0], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_property_lp_matches_vertex_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    G = np.vstack([rng.normal(size=(n + 3, n)), np.eye(n), -np.eye(n)])
    h = np.concatenate([rng.uniform(0.5, 2.0, n + 3), np.full(2 * n, 5.0)])
    c = rng.normal(size=n)
    out = solve_lp(ConicProblem(c, (nonneg(G, h),)))
    assert out.status == OPTIMAL
    assert out.objective == pytest.approx(brute_force_lp(c, G, h), abs=1e-7)


def test_socp_closed_form():
    # || (rho, rho) || <= 1
    block = ConeBlock("second_order", np.array([[0.0], [-1.0], [-1.0]]), np.array([1.0, 0, 0]))
    out = solve_socp(ConicProblem([1.0], (block,)))
    assert out.objective == pytest.approx(np.sqrt(2) / 2, abs=1e-7)


def test_socp_zero_radius_forces_zero():
    # || v || <= 0 with v free, maximise v1 + v2
    block = ConeBlock("second_order", -np.vstack([np.zeros((1, 2)), np.eye(2)]), np.zeros(3))
    out = solve_socp(ConicProblem([1.0, 1.0], (block, nonneg(np.eye(2), [1.0, 1.0]))))
    assert out.status == OPTIMAL
    np.testing.assert_allclose(out.x, 0.0, atol=1e-6)


def test_lp_posed_as_socp():
    rng = np.random.default_rng(4)
    G = np.vstack([rng.normal(size=(6, 3)), np.eye(3), -np.eye(3)])
    h = np.concatenate([rng.uniform(0.5, 2.0, 6), np.full(6, 4.0)])
    c = rng.normal(size=3)
    lp = solve_lp(ConicProblem(c, (nonneg(G, h),)))
    soc_blocks = tuple(ConeBlock("second_order", np.vstack([g, np.zeros(3)]), np.array([hi, 0.0]))
                       for g, hi in zip(G, h))
    soc = solve_socp(ConicProblem(c, soc_blocks))
    assert soc.objective == pytest.approx(lp.objective, abs=1e-7)


def psd_block(G_mats, H):
    """``H - sum_k x_k G_k`` as a PSD block from matrices."""
    G = np.column_stack([Gk.reshape(-1, order="F") for Gk in G_mats])
    return ConeBlock("psd", G, H.reshape(-1, order="F"))


def test_sdp_determinant_condition():
    block = psd_block([-np.array([[0.0, 1.0], [1.0, 0.0]])], np.eye(2))
    out = solve_sdp(ConicProblem([1.0], (block,)))
    assert out.objective == pytest.approx(1.0, abs=1e-7)


def test_sdp_diagonal():
    block = psd_block([np.eye(2)], np.diag([1.0, 2.0]))
    out = solve_sdp(ConicProblem([1.0], (block,)))
    assert out.objective == pytest.approx(1.0, abs=1e-7)
    S = block.slack(out.x).reshape(2, 2, order="F")
    assert np.linalg.eigvalsh(S).min() >= -1e-7


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**31 - 1))
def test_property_sdp_duality_gap(m, seed):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(3):
        X = rng.normal(size=(m, m))
        mats.append(X + X.T)
    block = psd_block(mats, np.eye(m) * 3.0)
    box = nonneg(np.vstack([np.eye(3), -np.eye(3)]), np.full(6, 2.0))
    out = solve_sdp(ConicProblem(rng.normal(size=3), (block, box)))
    assert out.status == OPTIMAL
    assert abs(out.objective - out.dual_objective) < 1e-6 * max(1.0, abs(out.objective))
    assert out.violation <= 1e-7


def test_qp_maximises_concave_objective():
    out = solve_qp(ConicProblem([2.0], (nonneg([[1.0]], [10.0]),), P=[[1.0]]))
    assert out.objective == pytest.approx(2.0, abs=1e-8)
    assert out.x[0] == pytest.approx(2.0, abs=1e-6)


def test_dispatch_and_determinism():
    block = ConeBlock("second_order", np.array([[0.0], [-1.0], [-1.0]]), np.array([1.0, 0, 0]))
    p = ConicProblem([1.0], (block,))
    a, b = solve(p), solve(p)
    assert a.status == b.status
    assert abs(a.objective - b.objective) <= 1e-9


def test_problem_validation():
    with pytest.raises(ValueError):
        ConeBlock("exponential", np.eye(1), np.zeros(1))
    with pytest.raises(ValueError):
        ConeBlock("psd", np.zeros((3, 1)), np.zeros(3))
    with pytest.raises(ValueError):
        ConeBlock("psd", np.zeros((4, 1)), np.array([1.0, 2.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        ConicProblem([1.0, 2.0], (nonneg([[1.0]], [1.0]),))


def test_problem_json_round_trip():
    block = psd_block([np.eye(2)], np.diag([1.0, 2.0]))
    p = ConicProblem([1.0], (block, nonneg([[1.0]], [5.0])), layout={"t": slice(0, 1)})
    q = ConicProblem.from_json(p.to_json())
    assert q.to_json() == p.to_json()
    assert solve(q).objective == pytest.approx(solve(p).objective, abs=1e-12)


def test_lp_model_coefficient_edits():
    # max f s.t. f * d - x = 0, x <= 3 with d edited in place
    model = LPModel([0.0, 1.0], G=[[1.0, 0.0]], h=[3.0], A_eq=[[1.0, -1.0]], b_eq=[0.0])
    assert model.solve().objective == pytest.approx(3.0)
    model.set_coeff(0, 1, -2.0)
    assert model.solve().objective == pytest.approx(1.5)
    model.set_cost([0.0, -1.0])
    assert model.solve().status == UNBOUNDED
