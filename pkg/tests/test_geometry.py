import itertools

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import linprog

from prongsuf.geometry import (DegenerateError, EmptyPolytopeError, Polytope3,
                               UnboundedPolytopeError, chebyshev_origin, fibonacci_sphere,
                               hrep_to_vrep, merge_facets, vrep_to_hrep)
from prongsuf.robots import fixture_suf

CUBE = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))
CUBE_A = np.vstack([np.eye(3), -np.eye(3)])


def inside_hull_lp(points, probe, tol=1e-9):
    """Convex-combination feasibility, independent of any facet description."""
    n = len(points)
    A_eq = np.vstack([points.T, np.ones((1, n))])
    b_eq = np.concatenate([probe, [1.0]])
    res = linprog(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return res.status == 0


def lp_radius(A, b):
    # max r s.t. r |a_i| <= b_i
    norms = np.linalg.norm(A, axis=1)
    res = linprog([-1.0], A_ub=norms[:, None], b_ub=b, bounds=[(None, None)], method="highs",
                  options={"primal_feasibility_tolerance": 1e-10})
    return -res.fun


@pytest.mark.parametrize("n", [1, 10, 1024])
def test_fibonacci_unit_norm(n):
    v = fibonacci_sphere(n)
    assert v.shape == (n, 3)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)


def test_fibonacci_min_angle_and_lattice():
    v = fibonacci_sphere(1024)
    cos = v @ v.T
    np.fill_diagonal(cos, -1.0)
    assert np.degrees(np.arccos(cos.max())) > 4.0
    np.testing.assert_allclose(fibonacci_sphere(2)[:, 2], [0.5, -0.5])
    np.testing.assert_array_equal(fibonacci_sphere(64), fibonacci_sphere(64))


def test_fibonacci_rejects_zero():
    with pytest.raises(ValueError):
        fibonacci_sphere(0)


def test_fibonacci_cap_discrepancy_shrinks():
    rng = np.random.default_rng(0)
    caps = rng.normal(size=(200, 3))
    caps /= np.linalg.norm(caps, axis=1, keepdims=True)
    heights = rng.uniform(-1, 1, size=200)

    def discrepancy(n):
        v = fibonacci_sphere(n)
        frac = np.mean(v @ caps.T >= heights, axis=0)
        return np.max(np.abs(frac - (1 - heights) / 2))

    d = [discrepancy(n) for n in (64, 256, 1024)]
    assert d[0] > d[1] > d[2]


def test_cube_vertices_to_six_facets():
    A, b = vrep_to_hrep(CUBE)
    assert A.shape == (6, 3)
    rows = {tuple(np.round(a / bi, 12)) for a, bi in zip(A, b)}
    assert rows == {tuple(r) for r in CUBE_A}


def test_tetrahedron_has_four_facets():
    tet = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    A, b = vrep_to_hrep(tet)
    assert A.shape == (4, 3)


def test_cube_facets_to_eight_corners():
    v = hrep_to_vrep(CUBE_A, np.ones(6))
    assert {tuple(p) for p in np.round(v, 12)} == {tuple(p) for p in CUBE}


def test_merge_facets_removes_duplicate_rows():
    A = np.vstack([CUBE_A, CUBE_A[:2] * 3.0])
    b = np.concatenate([np.ones(6), np.full(2, 3.0)])
    A2, b2 = merge_facets(A, b)
    assert A2.shape == (6, 3)


def test_flat_points_rejected():
    flat = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0.3, 0.2, 0.0]])
    with pytest.raises(DegenerateError):
        vrep_to_hrep(flat)
    with pytest.raises(DegenerateError):
        vrep_to_hrep(CUBE[:3])


def test_empty_and_unbounded_are_distinct():
    A = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
    b = np.array([-1.0, -1.0, 1, 1, 1, 1])
    with pytest.raises(EmptyPolytopeError):
        hrep_to_vrep(A, b)
    with pytest.raises(UnboundedPolytopeError):
        hrep_to_vrep(np.eye(3), np.ones(3))


def test_membership_matches_lp_oracle_on_random_hull():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(50, 3))
    poly = Polytope3.from_vertices(pts)
    probes = rng.normal(scale=1.3, size=(1000, 3))
    ours = poly.contains(probes, tol=1e-9)
    oracle = np.array([inside_hull_lp(pts, p) for p in probes])
    assert np.sum(ours != oracle) == 0


def test_round_trip_recovers_vertices():
    rng = np.random.default_rng(2)
    for _ in range(5):
        pts = rng.normal(size=(30, 3))
        poly = Polytope3.from_vertices(pts)
        back = hrep_to_vrep(poly.A, poly.b)
        a = np.array(sorted(map(tuple, np.round(poly.vertices, 7))))
        c = np.array(sorted(map(tuple, np.round(back, 7))))
        assert a.shape == c.shape
        np.testing.assert_allclose(a, c, atol=1e-8)
        assert np.all(poly.contains(poly.vertices, tol=1e-8))


def test_chebyshev_origin_boxes():
    assert chebyshev_origin(CUBE_A, np.ones(6)).radius == 1.0
    b = np.array([3.0, 1, 1, 1, 1, 1])
    assert chebyshev_origin(CUBE_A, b).radius == 1.0


def test_chebyshev_origin_fixture_closed_form():
    mu, m, g = 0.5, 10.0, 9.81
    k = np.sqrt(2) / 2 * mu
    # load at the CoM: lambda = weight - F, pyramid rows G lambda <= 0
    G = np.array([[0, 0, -1], [1, 0, -k], [-1, 0, -k], [0, 1, -k], [0, -1, -k]])
    rho = chebyshev_origin(-G, -G @ np.array([0, 0, m * g])).radius
    assert rho == pytest.approx(fixture_suf(), rel=1e-12)
    assert rho == pytest.approx(32.70, rel=5e-4)


def test_chebyshev_origin_flags_violated_row():
    ball = chebyshev_origin(CUBE_A, np.array([1, 1, -0.5, 1, 1, 1.0]))
    assert ball.radius == 0.0 and ball.violated_row == 2


def test_polytope_exports(tmp_path):
    poly = Polytope3.from_vertices(CUBE)
    poly.write_csv(tmp_path / "v.csv")
    poly.write_csv(tmp_path / "h.csv", which="halfspaces")
    poly.write_obj(tmp_path / "p.obj")
    v = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    assert v.shape == (8, 3)
    h = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1)
    assert h.shape == (6, 4)
    obj = (tmp_path / "p.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in obj) == 8
    assert sum(line.startswith("f ") for line in obj) == 12
    tris = poly.triangles()
    for t in tris:
        p0, p1, p2 = poly.vertices[t]
        assert np.cross(p1 - p0, p2 - p0) @ p0 > 0


coords = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(coords, min_size=3, max_size=3), min_size=4, max_size=40),
       st.integers(0, 2**31 - 1))
def test_property_hull_conversions_agree(points, seed):
    pts = np.array(points)
    centred = pts - pts.mean(axis=0)
    assume(np.linalg.svd(centred, compute_uv=False)[-1] > 1e-2)
    A, b = vrep_to_hrep(pts)
    V = hrep_to_vrep(A, b)
    A2, b2 = vrep_to_hrep(V)
    probes = np.random.default_rng(seed).normal(scale=8, size=(300, 3))
    s1 = np.max(probes @ A.T - b[None, :], axis=1)
    s2 = np.max(probes @ A2.T - b2[None, :], axis=1)
    clear = (np.abs(s1) > 1e-7) & (np.abs(s2) > 1e-7)
    assert np.all((s1 <= 0)[clear] == (s2 <= 0)[clear])


@settings(max_examples=100, deadline=None)
@given(st.integers(4, 30), st.integers(0, 2**31 - 1))
def test_property_chebyshev_matches_row_formula_and_lp(m, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, 3))
    b = rng.uniform(0.1, 5.0, size=m)
    r = chebyshev_origin(A, b).radius
    assert r == np.min(b / np.linalg.norm(A, axis=1))
    assert r == pytest.approx(lp_radius(A, b), abs=1e-10)
