"""Convex polytopes in 3-D force space.

Halfspaces are ``A @ F <= b``.  Hull conversions use Qhull through
``scipy.spatial``; coplanar facets coming out of Qhull's triangulation are
merged so the H-representation is minimal.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

MERGE_TOL = 1e-9
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


class GeometryError(ValueError):
    pass


class DegenerateError(GeometryError):
    """Input is not full-dimensional in 3-D."""


class EmptyPolytopeError(GeometryError):
    pass


class UnboundedPolytopeError(GeometryError):
    pass


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors on the golden-angle spiral.

    Heights follow ``z_k = 1 - (2k + 1) / n``.
    """
    if n < 1:
        raise ValueError("need at least one direction")
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = k * GOLDEN_ANGLE
    v = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _affine_rank(points, tol=1e-10) -> int:
    centred = points - points.mean(axis=0)
    if not centred.size:
        return 0
    s = np.linalg.svd(centred, compute_uv=False)
    scale = max(np.max(np.abs(points)), 1.0)
    return int(np.sum(s > tol * scale))


def merge_facets(A, b, tol: float = MERGE_TOL):
    """Collapse rows whose unit normals and offsets agree within ``tol``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(b) <= 1:
        return A, b
    norms = np.linalg.norm(A, axis=1)
    An, bn = A / norms[:, None], b / norms
    key = np.column_stack([An, bn / max(1.0, float(np.max(np.abs(bn))))])
    pairs = cKDTree(key).query_pairs(tol, p=np.inf, output_type="ndarray")
    n = len(b)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    n_groups, label = connected_components(graph, directed=False)
    first = np.full(n_groups, -1)
    for i in range(n):
        if first[label[i]] < 0:
            first[label[i]] = i
    return A[first], b[first]


def vrep_to_hrep(vertices, merge_tol: float = MERGE_TOL):
    """Facets of the convex hull as unit-normal halfspaces ``A @ F <= b``."""
    pts = np.asarray(vertices, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise DegenerateError("need at least four points in 3-D")
    if _affine_rank(pts) < 3:
        raise DegenerateError("points are not full-dimensional")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateError(str(exc)) from exc
    A = hull.equations[:, :3]
    b = -hull.equations[:, 3]
    norms = np.linalg.norm(A, axis=1)
    return merge_facets(A / norms[:, None], b / norms, merge_tol)


def _chebyshev_center(A, b):
    """Largest inscribed ball by LP; returns (center, radius) or raises."""
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(4)
    c[3] = -1.0
    res = linprog(c, A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None)] * 3 + [(None, None)], method="highs")
    if res.status == 2:
        raise EmptyPolytopeError("halfspaces have no common point")
    if res.status == 3:
        # radius unbounded implies the set is unbounded
        raise UnboundedPolytopeError("halfspaces do not bound a polytope")
    if res.status != 0:
        raise GeometryError(f"Chebyshev LP failed: {res.message}")
    return res.x[:3], res.x[3]


def _check_bounded(A, b):
    for axis in range(3):
        for sign in (1.0, -1.0):
            c = np.zeros(3)
            c[axis] = -sign
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * 3, method="highs")
            if res.status == 3:
                raise UnboundedPolytopeError("halfspaces do not bound a polytope")
            if res.status == 2:
                raise EmptyPolytopeError("halfspaces have no common point")


def _dedupe(points, tol):
    if len(points) == 0:
        return points
    scale = max(1.0, float(np.max(np.abs(points))))
    pairs = cKDTree(points).query_pairs(tol * scale, p=np.inf, output_type="ndarray")
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    _, label = connected_components(graph, directed=False)
    _, first = np.unique(label, return_index=True)
    return points[np.sort(first)]


def halfspace_vertices(A, b, interior, dedupe_tol: float = 1e-9) -> np.ndarray:
    """Vertices of ``{x : A x <= b}`` (any dimension) given a strictly interior point."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    hs = HalfspaceIntersection(np.column_stack([A, -b]), np.asarray(interior, dtype=float))
    pts = hs.intersections
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    return _dedupe(pts, dedupe_tol)


def hrep_to_vrep(A, b, dedupe_tol: float = 1e-9) -> np.ndarray:
    """Extreme points of a bounded 3-D polytope ``A @ F <= b``.

    Raises EmptyPolytopeError, UnboundedPolytopeError or DegenerateError.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_bounded(A, b)
    centre, radius = _chebyshev_center(A, b)
    if radius < -1e-12:
        raise EmptyPolytopeError("halfspaces have no common point")
    if radius <= 1e-10 * max(1.0, float(np.max(np.abs(b)))):
        raise DegenerateError("polytope has empty interior")
    try:
        return halfspace_vertices(A, b, centre, dedupe_tol)
    except QhullError as exc:
        raise GeometryError(str(exc)) from exc


class OriginBall(NamedTuple):
    radius: float
    violated_row: int | None


def chebyshev_origin(A, b, tol: float = 0.0) -> OriginBall:
    """Radius of the largest origin-centred ball inside ``A @ F <= b``.

    It is ``min_i b_i / |a_i|``.  When the origin violates a row by more
    than ``tol`` the radius is 0 and that row index is returned.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(b) == 0:
        return OriginBall(float("inf"), None)
    dist = b / np.linalg.norm(A, axis=1)
    i = int(np.argmin(dist))
    if dist[i] < -tol:
        return OriginBall(0.0, i)
    return OriginBall(max(float(dist[i]), 0.0), None)


@dataclass(frozen=True, eq=False)
class Polytope3:
    vertices: np.ndarray
    A: np.ndarray
    b: np.ndarray
    tag: str = "exact"

    @classmethod
    def from_vertices(cls, points, tag: str = "exact") -> "Polytope3":
        pts = np.asarray(points, dtype=float)
        A, b = vrep_to_hrep(pts)
        hull = ConvexHull(pts)
        return cls(pts[hull.vertices], A, b, tag)

    @classmethod
    def from_halfspaces(cls, A, b, tag: str = "exact") -> "Polytope3":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        verts = hrep_to_vrep(A, b)
        A2, b2 = vrep_to_hrep(verts)
        return cls(verts, A2, b2, tag)

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all(pts @ self.A.T - self.b <= tol, axis=1)

    def origin_radius(self) -> OriginBall:
        return chebyshev_origin(self.A, self.b)

    def triangles(self) -> np.ndarray:
        """Outward-oriented triangle indices into ``vertices``."""
        hull = ConvexHull(self.vertices)
        tris = hull.simplices.copy()
        centre = self.vertices.mean(axis=0)
        for t in tris:
            p0, p1, p2 = self.vertices[t]
            if np.cross(p1 - p0, p2 - p0) @ (p0 - centre) < 0:
                t[1], t[2] = t[2], t[1]
        return tris

    def write_csv(self, path, which: str = "vertices"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if which == "vertices":
                w.writerow(["fx", "fy", "fz"])
                for v in self.vertices:
                    w.writerow([repr(float(x)) for x in v])
            elif which == "halfspaces":
                w.writerow(["ax", "ay", "az", "b"])
                for a, bi in zip(self.A, self.b):
                    w.writerow([repr(float(x)) for x in (*a, bi)])
            else:
                raise ValueError("which must be 'vertices' or 'halfspaces'")

    def write_obj(self, path):
        with open(path, "w") as fh:
            fh.write(f"# polytope {self.tag}: {len(self.vertices)} vertices\n")
            for v in self.vertices:
                fh.write("v {:.9g} {:.9g} {:.9g}\n".format(*v))
            for t in self.triangles():
                fh.write("f {} {} {}\n".format(*(t + 1)))
