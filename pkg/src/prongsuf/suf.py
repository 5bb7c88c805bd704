"""Smallest Unrejectable Force (SUF) by five methods.

All methods work on a :class:`~prongsuf.contacts.ReducedSystem`, i.e. on
halfspaces ``a_F . F + a_Q . dQ <= b`` over the disturbance force ``F`` and
the free recourse coordinates ``dQ``.

* ``exact``      the Rejectable Force Polytope (RFP) as the projection of the
                 lifted polytope onto F, then the origin-centred inscribed ball.
* ``single``     the largest admissible force along one fixed direction.
* ``fibonacci``  hull of the boundary points along Fibonacci-sphere directions.
* ``affine``     robust radius with recourse ``dQ = dQ0 + V F`` (SOCP).
* ``quadratic``  robust radius with recourse ``dQ = dQ0 + V F + (F' W_j F)_j``
                 (SDP via the S-lemma).

Every method reports rho = 0 when the robot cannot hold its posture at all.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .contacts import ConstraintSystem, ReducedSystem
from .geometry import (DegenerateError, GeometryError, Polytope3, _affine_rank, _dedupe,
                       chebyshev_origin, fibonacci_sphere, halfspace_vertices)
from .solver import ConeBlock, ConicProblem, LPModel, solve_sdp, solve_socp

METHODS = ("exact", "single", "fibonacci", "affine", "quadratic")
DEFAULT_DIRECTION = (1.0, 0.0, 0.0)
CONIC_TOL = 1e-10
RETRY_TOL = 1e-8
RAY_TOL = 1e-9

OK = "ok"
ORIGIN_INFEASIBLE = "origin-infeasible"
DEGENERATE = "degenerate"
BUDGET_EXCEEDED = "budget-exceeded"
NUMERIC_FAILURE = "numeric-failure"
UNBOUNDED = "unbounded"


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Recourse law ``dQ(F) = offset + gain @ F + (F' quadratic[j] F)_j``.

    ``zeta``/``xi`` are the auxiliary variables of the S-lemma program.
    """

    offset: np.ndarray
    gain: np.ndarray
    quadratic: np.ndarray | None = None
    zeta: np.ndarray | None = None
    xi: np.ndarray | None = None

    def recourse(self, F) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        dQ = self.offset + self.gain @ F
        if self.quadratic is not None and len(self.quadratic):
            dQ = dQ + np.einsum("i,jik,k->j", F, self.quadratic, F)
        return dQ

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else np.asarray(x).tolist()
        return {"offset": arr(self.offset), "gain": arr(self.gain),
                "quadratic": arr(self.quadratic), "zeta": arr(self.zeta), "xi": arr(self.xi)}

    @classmethod
    def from_dict(cls, doc: dict) -> "DecisionRule":
        n = len(doc["offset"])

        def arr(x, shape=None):
            if x is None:
                return None
            a = np.array(x, dtype=float)
            return a.reshape(shape) if shape is not None else a
        return cls(arr(doc["offset"], (n,)), arr(doc["gain"], (n, 3)),
                   arr(doc.get("quadratic"), (n, 3, 3)) if doc.get("quadratic") is not None else None,
                   arr(doc.get("zeta")), arr(doc.get("xi")))


@dataclass(eq=False)
class SufResult:
    method: str
    rho: float
    status: str = OK
    wall_time: float = 0.0
    polytope: Polytope3 | None = None
    certificate: DecisionRule | None = None
    direction: np.ndarray | None = None
    scale: float | None = None
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {"method": self.method, "rho": self.rho, "status": self.status,
               "wall_time": self.wall_time, "info": self.info}
        if self.polytope is not None:
            doc["polytope"] = {"tag": self.polytope.tag,
                               "vertices": self.polytope.vertices.tolist(),
                               "A": self.polytope.A.tolist(), "b": self.polytope.b.tolist()}
        if self.certificate is not None:
            doc["certificate"] = self.certificate.to_dict()
        if self.direction is not None:
            doc["direction"] = np.asarray(self.direction).tolist()
            doc["scale"] = self.scale
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SufResult":
        poly = doc.get("polytope")
        cert = doc.get("certificate")
        return cls(
            method=doc["method"], rho=float(doc["rho"]), status=doc.get("status", OK),
            wall_time=float(doc.get("wall_time", 0.0)),
            polytope=None if poly is None else Polytope3(
                np.array(poly["vertices"]), np.array(poly["A"]), np.array(poly["b"]), poly["tag"]),
            certificate=None if cert is None else DecisionRule.from_dict(cert),
            direction=None if doc.get("direction") is None else np.array(doc["direction"]),
            scale=doc.get("scale"), info=doc.get("info", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _precheck(reduced: ReducedSystem, method: str) -> SufResult | None:
    if reduced.status == "infeasible":
        return SufResult(method, 0.0, ORIGIN_INFEASIBLE)
    if reduced.status == "degenerate":
        return SufResult(method, 0.0, DEGENERATE)
    return None


# --------------------------------------------------------------------------
# LP based methods


class RayShooter:
    """Largest ``f >= 0`` with ``f * direction`` in the RFP, one warm-started LP.

    Variables are ``(F, dQ, f)`` with ``F = f * direction`` as equality rows,
    so switching direction only touches three coefficients.
    """

    def __init__(self, reduced: ReducedSystem):
        A, b = reduced.normalized_halfspaces()
        n = reduced.dim
        self.n = n
        G = np.hstack([A, np.zeros((len(b), 1))])
        A_eq = np.zeros((3, n + 1))
        A_eq[:, :3] = np.eye(3)
        c = np.zeros(n + 1)
        c[n] = 1.0
        lower = np.full(n + 1, -np.inf)
        lower[n] = 0.0
        self.lp = LPModel(c, G, b, A_eq, np.zeros(3), lower=lower)
        self.A, self.b = A, b
        self.last_point = None
        self.cost = c
        self.cap = reduced.force_cap

    def origin_feasible(self) -> bool:
        """Whether F = 0 admits a recourse; a ray LP alone cannot tell."""
        for k in range(3):
            self.lp.set_coeff(k, self.n, 0.0)
        self.lp.set_cost(np.zeros_like(self.cost))
        out = self.lp.solve()
        self.lp.set_cost(self.cost)
        if out.status == "infeasible":
            return False
        if not out.ok:
            raise RuntimeError(f"origin feasibility LP failed: {out.status}")
        return True

    def _violation(self, x) -> float:
        return float(np.max(self.A @ x[:self.n] - self.b, initial=0.0))

    def shoot(self, direction):
        """Return ``(status, f)``; status is ok, origin-infeasible, unbounded or numeric-failure."""
        for k in range(3):
            self.lp.set_coeff(k, self.n, -float(direction[k]))
        out = self.lp.solve()
        if out.ok and self._violation(out.x) > RAY_TOL:
            # a warm start after coefficient edits can end slightly outside
            out = self.lp.solve(cold=True)
        self.last_point = out.x[:self.n] if out.ok else None
        if out.status == "infeasible":
            return ORIGIN_INFEASIBLE, 0.0
        if out.status == "unbounded":
            return UNBOUNDED, float("inf")
        if not out.ok:
            return NUMERIC_FAILURE, float("nan")
        f = float(out.x[self.n])
        f = f if f > 0 else 0.0
        if self.cap is not None and np.max(np.abs(f * np.asarray(direction))) >= self.cap * (1 - 1e-9):
            return UNBOUNDED, f
        return OK, f


def suf_single(reduced: ReducedSystem, direction=DEFAULT_DIRECTION) -> SufResult:
    """Largest force along one predetermined unit direction."""
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    pre = _precheck(reduced, "single")
    if pre is not None:
        pre.direction, pre.scale = direction, 0.0
        return pre
    t0 = time.perf_counter()
    shooter = RayShooter(reduced)
    if not shooter.origin_feasible():
        return SufResult("single", 0.0, ORIGIN_INFEASIBLE, time.perf_counter() - t0,
                         direction=direction, scale=0.0)
    status, f = shooter.shoot(direction)
    elapsed = time.perf_counter() - t0
    if status == UNBOUNDED:
        f = float("inf")
    return SufResult("single", f if status != NUMERIC_FAILURE else 0.0, status, elapsed,
                     direction=direction, scale=f)


def suf_fibonacci(reduced: ReducedSystem, n: int = 1024) -> SufResult:
    """Inner approximation of the RFP from ``n`` Fibonacci-sphere ray shots."""
    pre = _precheck(reduced, "fibonacci")
    if pre is not None:
        return pre
    t0 = time.perf_counter()
    shooter = RayShooter(reduced)
    if not shooter.origin_feasible():
        return SufResult("fibonacci", 0.0, ORIGIN_INFEASIBLE, time.perf_counter() - t0)
    directions = fibonacci_sphere(n)
    points, failures, capped = [], 0, 0
    for d in directions:
        status, f = shooter.shoot(d)
        if status == ORIGIN_INFEASIBLE:
            return SufResult("fibonacci", 0.0, ORIGIN_INFEASIBLE, time.perf_counter() - t0)
        if status == NUMERIC_FAILURE:
            failures += 1
            continue
        capped += status == UNBOUNDED
        points.append(f * d)
    info = {"samples": n, "failed_directions": failures, "capped_directions": capped}
    try:
        poly = Polytope3.from_vertices(np.array(points), tag=f"fibonacci-{n}")
    except (DegenerateError, ValueError):
        return SufResult("fibonacci", 0.0, DEGENERATE, time.perf_counter() - t0, info=info)
    ball = poly.origin_radius()
    elapsed = time.perf_counter() - t0
    return SufResult("fibonacci", ball.radius, OK, elapsed, polytope=poly, info=info)


def _lifted_interior(A, b):
    """Chebyshev centre of the lifted polytope (rows already unit norm)."""
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[n] = 1.0
    upper = np.full(n + 1, np.inf)
    upper[n] = 1e6
    lp = LPModel(c, np.hstack([A, np.ones((len(b), 1))]), b, upper=upper)
    out = lp.solve()
    if out.status == "infeasible":
        return None, -1.0
    if not out.ok:
        raise GeometryError(f"interior point LP failed: {out.status}")
    return out.x[:n], float(out.x[n])


def project_polytope(reduced: ReducedSystem, tol: float = 1e-9, max_lps: int = 50000) -> np.ndarray:
    """Vertices of the RFP by incremental support-function projection.

    Starting from a few support points, every facet of the current inner hull
    is tested with one LP in its normal direction: either a point beyond the
    facet is added or the facet is certified as a facet of the projection.
    Terminates with the exact projection (up to LP tolerance).
    """
    A, b = reduced.normalized_halfspaces()
    n2 = reduced.n_free
    lp = LPModel(np.zeros(reduced.dim), A, b)

    def support(direction):
        lp.set_cost(np.concatenate([direction, np.zeros(n2)]))
        out = lp.solve()
        if out.status == "infeasible":
            raise _Empty()
        if not out.ok:
            raise GeometryError(f"support LP failed: {out.status}")
        return out.x[:3]

    seeds = np.vstack([np.eye(3), -np.eye(3), fibonacci_sphere(8)])
    points = [support(d) for d in seeds]
    n_lp = len(points)
    confirmed = set()
    while True:
        pts = np.array(points)
        if _affine_rank(pts, 1e-9) < 3:
            raise DegenerateError("projection is not full-dimensional")
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise DegenerateError(str(exc)) from exc
        scale = max(1.0, float(np.max(np.abs(pts))))
        added = False
        for simplex, eq in zip(hull.simplices, hull.equations):
            key = tuple(sorted(simplex))
            if key in confirmed:
                continue
            normal, offset = eq[:3], -eq[3]
            p = support(normal)
            n_lp += 1
            if normal @ p > offset + tol * scale:
                points.append(p)
                added = True
            else:
                confirmed.add(key)
            if n_lp > max_lps:
                raise BudgetExceeded("projection LP budget exhausted")
        if not added:
            return pts[hull.vertices]


class _Empty(Exception):
    pass


def suf_exact(reduced: ReducedSystem, algorithm: str = "auto", vertex_budget: int = 200_000,
              max_vertex_dim: int = 9) -> SufResult:
    """Exact SUF from the exact RFP.

    ``algorithm``: ``vertex`` enumerates the vertices of the lifted
    (F, dQ) polytope and projects them; ``projection`` builds the RFP facet by
    facet from support LPs; ``auto`` uses vertex enumeration up to
    ``max_vertex_dim`` lifted dimensions.
    """
    if algorithm not in ("auto", "vertex", "projection"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    pre = _precheck(reduced, "exact")
    if pre is not None:
        return pre
    t0 = time.perf_counter()
    if algorithm == "auto":
        algorithm = "vertex" if reduced.dim <= max_vertex_dim else "projection"
    info = {"algorithm": algorithm, "lifted_dim": reduced.dim}
    try:
        if algorithm == "vertex":
            A, b = reduced.normalized_halfspaces()
            centre, radius = _lifted_interior(A, b)
            if radius < 0:
                raise _Empty()
            if radius <= 1e-9 * max(1.0, float(np.max(np.abs(b)))):
                # lifted set is flat; the projection route still works
                info["algorithm"] = "projection"
                verts = project_polytope(reduced)
            else:
                lifted = halfspace_vertices(A, b, centre)
                info["lifted_vertices"] = len(lifted)
                if len(lifted) > vertex_budget:
                    raise BudgetExceeded(f"{len(lifted)} vertices exceed budget {vertex_budget}")
                verts = _dedupe(lifted[:, :3], 1e-10)
        else:
            verts = project_polytope(reduced)
        poly = Polytope3.from_vertices(verts, tag="exact")
    except _Empty:
        return SufResult("exact", 0.0, ORIGIN_INFEASIBLE, time.perf_counter() - t0, info=info)
    except BudgetExceeded as exc:
        info["reason"] = str(exc)
        return SufResult("exact", float("nan"), BUDGET_EXCEEDED, time.perf_counter() - t0, info=info)
    except (DegenerateError, ValueError):
        return SufResult("exact", 0.0, DEGENERATE, time.perf_counter() - t0, info=info)
    ball = poly.origin_radius()
    rho = ball.radius
    if ball.violated_row is None and rho > 0:
        rho = _polish_radius(reduced, poly, rho)
    elapsed = time.perf_counter() - t0
    status = ORIGIN_INFEASIBLE if ball.violated_row is not None else OK
    return SufResult("exact", rho, status, elapsed, polytope=poly, info=info)


def _polish_radius(reduced: ReducedSystem, poly: Polytope3, rho: float, band: float = 1e-6) -> float:
    """Re-evaluate the limiting facet offsets with support LPs.

    Hull facets carry the rounding of vertex enumeration; the support
    function along each nearly limiting normal is LP-accurate instead.
    """
    A, b = reduced.normalized_halfspaces()
    lp = LPModel(np.zeros(reduced.dim), A, b)
    dist = poly.b / np.linalg.norm(poly.A, axis=1)
    best = np.inf
    for i in np.flatnonzero(dist <= rho * (1 + band)):
        normal = poly.A[i] / np.linalg.norm(poly.A[i])
        lp.set_cost(np.concatenate([normal, np.zeros(reduced.n_free)]))
        out = lp.solve()
        if not out.ok:
            return rho
        best = min(best, out.objective)
    return float(best) if np.isfinite(best) else rho


# --------------------------------------------------------------------------
# decision-rule methods


def _split_rows(reduced: ReducedSystem):
    A, b = reduced.normalized_halfspaces()
    return A[:, :3], A[:, 3:], b


def affine_problem(reduced: ReducedSystem, tol: float = CONIC_TOL) -> ConicProblem:
    """SOCP in ``(rho, dQ0, G)`` with ``G = rho V``:
    ``a_Q . dQ0 + |rho a_F + G' a_Q| <= b`` for every row."""
    aF, aQ, b = _split_rows(reduced)
    m, n2 = aQ.shape
    nv = 1 + n2 + 3 * n2
    blocks = [ConeBlock("nonnegative", -np.eye(1, nv), np.zeros(1))]
    for i in range(m):
        G = np.zeros((4, nv))
        G[0, 1:1 + n2] = aQ[i]
        G[1:4, 0] = -aF[i]
        for k in range(3):
            G[1 + k, 1 + n2 + k:1 + n2 + 3 * n2:3] = -aQ[i]
        blocks.append(ConeBlock("second_order", G, np.array([b[i], 0.0, 0.0, 0.0])))
    c = np.zeros(nv)
    c[0] = 1.0
    layout = {"rho": slice(0, 1), "offset": slice(1, 1 + n2), "gain": slice(1 + n2, nv)}
    return ConicProblem(c, tuple(blocks), layout=layout, feas_tol=tol, gap_tol=tol)


_SYM = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def quadratic_problem(reduced: ReducedSystem, fix_quadratic_zero: bool = False,
                      tol: float = CONIC_TOL) -> ConicProblem:
    """SDP in ``(rho, dQ0, G, Wq, zeta, xi)``; one 4x4 LMI per row.

    The law in normalised disturbance ``u = F / rho`` is
    ``dQ0 + G u + (u' Wq_j u)_j``; a row holds over the unit ball iff
    ``zeta <= b``, ``xi >= 0`` and the S-lemma matrix is PSD.
    """
    aF, aQ, b = _split_rows(reduced)
    m, n2 = aQ.shape
    o_off, o_G = 1, 1 + n2
    o_W = o_G + 3 * n2
    o_z = o_W + 6 * n2
    o_x = o_z + m
    nv = o_x + m
    blocks = []
    rho_nonneg = np.zeros((1, nv))
    rho_nonneg[0, 0] = -1.0
    blocks.append(ConeBlock("nonnegative", rho_nonneg, np.zeros(1)))
    Gz = np.zeros((m, nv))
    Gz[:, o_z:o_z + m] = np.eye(m)
    blocks.append(ConeBlock("nonnegative", Gz, b))
    Gx = np.zeros((m, nv))
    Gx[:, o_x:o_x + m] = -np.eye(m)
    blocks.append(ConeBlock("nonnegative", Gx, np.zeros(m)))

    def at(r, c):
        return r + 4 * c

    for i in range(m):
        G = np.zeros((16, nv))
        # top-left: zeta - xi - aQ . dQ0
        G[0, o_z + i] = -1.0
        G[0, o_x + i] = 1.0
        G[0, o_off:o_off + n2] = aQ[i]
        for k in range(3):
            for idx in (at(0, 1 + k), at(1 + k, 0)):
                # -0.5 (rho aF_k + sum_j aQ_j G[j, k])
                G[idx, 0] = 0.5 * aF[i, k]
                G[idx, o_G + k:o_G + 3 * n2:3] = 0.5 * aQ[i]
        for p, (k, l) in enumerate(_SYM):
            for idx in {at(1 + k, 1 + l), at(1 + l, 1 + k)}:
                G[idx, o_W + p:o_W + 6 * n2:6] = aQ[i]
        for k in range(3):
            G[at(1 + k, 1 + k), o_x + i] = -1.0
        blocks.append(ConeBlock("psd", G, np.zeros(16)))
    A_eq = b_eq = None
    if fix_quadratic_zero and n2:
        A_eq = np.zeros((6 * n2, nv))
        A_eq[:, o_W:o_z] = np.eye(6 * n2)
        b_eq = np.zeros(6 * n2)
    c = np.zeros(nv)
    c[0] = 1.0
    layout = {"rho": slice(0, 1), "offset": slice(o_off, o_G), "gain": slice(o_G, o_W),
              "quadratic": slice(o_W, o_z), "zeta": slice(o_z, o_x), "xi": slice(o_x, nv)}
    return ConicProblem(c, tuple(blocks), A_eq, b_eq, layout=layout, feas_tol=tol, gap_tol=tol)


def _unpack_sym(params) -> np.ndarray:
    W = np.zeros((len(params), 3, 3))
    for p, (k, l) in enumerate(_SYM):
        W[:, k, l] = params[:, p]
        W[:, l, k] = params[:, p]
    return W


def max_quadratic_on_ball(Q, g, r: float) -> float:
    """``max x'Qx + g'x`` over ``|x| <= r`` (trust-region subproblem, exact)."""
    Q = 0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T)
    g = np.asarray(g, dtype=float)
    if r <= 0:
        return 0.0
    lam, U = np.linalg.eigh(Q)
    gh = U.T @ g
    lmax = lam[-1]
    scale = max(1.0, float(np.max(np.abs(lam))), float(np.linalg.norm(g)))

    def value(x):
        return float(np.sum(lam * x * x) + gh @ x)

    if lmax < 0:
        x0 = -0.5 * gh / lam
        if np.linalg.norm(x0) <= r:
            return value(x0)
    lo = max(lmax, 0.0)
    gap = 1e-14 * scale

    def xnorm(mu):
        return np.linalg.norm(0.5 * gh / (mu - lam))

    top = np.abs(lam - lmax) <= 1e-12 * scale
    if np.all(np.abs(gh[top]) <= 1e-14 * scale) and lmax >= 0:
        # possible hard case: mu = lmax with a component along the top eigenvector
        rest = ~top
        x = np.zeros(3)
        x[rest] = 0.5 * gh[rest] / (lmax - lam[rest])
        rem = r * r - float(x @ x)
        if rem >= 0:
            x[np.argmax(top)] = np.sqrt(rem)
            return value(x)
    hi = lo + np.linalg.norm(g) / (2.0 * r) + gap + 1.0
    while xnorm(hi) > r:
        hi = lo + 2.0 * (hi - lo)
    a, b = lo + gap, hi
    if xnorm(a) < r:
        a = lo
    for _ in range(200):
        mid = 0.5 * (a + b)
        if xnorm(mid) > r:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
    x = 0.5 * gh / (b - lam)
    return value(x)


def certified_radius(reduced: ReducedSystem, rule: DecisionRule, upper: float,
                     normalized: bool = True) -> float:
    """Largest ``r <= upper`` such that the law keeps every row feasible for all |F| <= r."""
    if normalized:
        A, b = reduced.normalized_halfspaces()
    else:
        A, b = reduced.halfspaces()
    aF, aQ = A[:, :3], A[:, 3:]
    c = aQ @ rule.offset
    g = aF + aQ @ rule.gain
    slack = b - c
    if np.any(slack < 0):
        return 0.0
    if rule.quadratic is None or not np.any(rule.quadratic):
        gn = np.linalg.norm(g, axis=1)
        with np.errstate(divide="ignore"):
            r = np.where(gn > 0, slack / np.where(gn > 0, gn, 1.0), np.inf)
        return float(min(upper, np.min(r)))
    Qs = np.einsum("ij,jkl->ikl", aQ, rule.quadratic)
    best = upper
    for i in range(len(b)):
        if max_quadratic_on_ball(Qs[i], g[i], best) <= slack[i]:
            continue
        lo, hi = 0.0, best
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if max_quadratic_on_ball(Qs[i], g[i], mid) <= slack[i]:
                lo = mid
            else:
                hi = mid
        best = lo
    return float(best)


def _solve_rule(reduced, method, problem, solve):
    t0 = time.perf_counter()
    out = solve(problem)
    retried = False
    if out.status == "numeric-failure" and problem.feas_tol < RETRY_TOL:
        # the law is certified independently below, so a looser solve is safe
        out = solve(replace(problem, feas_tol=RETRY_TOL, gap_tol=RETRY_TOL))
        retried = True
    if out.status == "infeasible":
        return SufResult(method, 0.0, ORIGIN_INFEASIBLE, time.perf_counter() - t0)
    if not out.ok:
        return SufResult(method, 0.0, NUMERIC_FAILURE, time.perf_counter() - t0,
                         info={"solver_status": out.status})
    L = problem.layout
    rho_s = max(float(out.x[0]), 0.0)
    n2 = reduced.n_free
    offset = out.x[L["offset"]]
    G = out.x[L["gain"]].reshape(n2, 3)
    inv = 1.0 / rho_s if rho_s > 0 else 0.0
    quad = zeta = xi = None
    if "quadratic" in L:
        quad = _unpack_sym(out.x[L["quadratic"]].reshape(n2, 6)) * inv * inv
        zeta, xi = out.x[L["zeta"]], out.x[L["xi"]]
    rule = DecisionRule(offset, G * inv, quad, zeta, xi)
    rho = certified_radius(reduced, rule, rho_s) if rho_s > 0 else 0.0
    elapsed = time.perf_counter() - t0
    info = {"solver_rho": rho_s, "solver_time": out.solve_time}
    if retried:
        info["solver_tol"] = RETRY_TOL
    # a feasible origin with no room around it: the RFP is flat or pinned
    status = OK if rho > 0 else DEGENERATE
    return SufResult(method, rho, status, elapsed, certificate=rule, info=info)


def suf_affine(reduced: ReducedSystem, tol: float = CONIC_TOL) -> SufResult:
    """Robust radius with an affine recourse law (SOCP).

    The returned rho is the radius certified for the returned law, which can
    only be marginally below the solver's objective.
    """
    pre = _precheck(reduced, "affine")
    if pre is not None:
        return pre
    if reduced.n_free == 0:
        return _no_recourse(reduced, "affine")
    return _solve_rule(reduced, "affine", affine_problem(reduced, tol), solve_socp)


def suf_quadratic(reduced: ReducedSystem, fix_quadratic_zero: bool = False,
                  tol: float = CONIC_TOL, affine_floor: bool = True) -> SufResult:
    """Robust radius with a quadratic recourse law (SDP).

    Affine laws are quadratic laws with ``W = 0``, but the SDP solver is
    less accurate than the SOCP one.  With ``affine_floor`` the affine
    optimum is computed as well and returned (as a quadratic law with zero
    quadratic terms) whenever its certified radius is larger.
    """
    pre = _precheck(reduced, "quadratic")
    if pre is not None:
        return pre
    if reduced.n_free == 0:
        return _no_recourse(reduced, "quadratic")
    t0 = time.perf_counter()
    problem = quadratic_problem(reduced, fix_quadratic_zero, tol)
    result = _solve_rule(reduced, "quadratic", problem, solve_sdp)
    if affine_floor and not fix_quadratic_zero:
        floor = _solve_rule(reduced, "affine", affine_problem(reduced, tol), solve_socp)
        if floor.status == OK and (result.status != OK or floor.rho > result.rho):
            rule = floor.certificate
            zero = np.zeros((reduced.n_free, 3, 3))
            info = dict(floor.info, sdp_rho=result.rho, sdp_status=result.status,
                        law="affine-floor")
            result = SufResult("quadratic", floor.rho, OK, certificate=DecisionRule(
                rule.offset, rule.gain, zero), info=info)
    result.wall_time = time.perf_counter() - t0
    return result


def _no_recourse(reduced, method):
    """Without free coordinates every law is the constant empty one."""
    t0 = time.perf_counter()
    A, b = reduced.normalized_halfspaces()
    ball = chebyshev_origin(A[:, :3], b)
    rule = DecisionRule(np.zeros(0), np.zeros((0, 3)),
                        np.zeros((0, 3, 3)) if method == "quadratic" else None)
    if ball.violated_row is not None:
        status = ORIGIN_INFEASIBLE
    else:
        status = OK if ball.radius > 0 else DEGENERATE
    return SufResult(method, ball.radius, status, time.perf_counter() - t0, certificate=rule)


def compute_suf(reduced: ReducedSystem, method: str, **kwargs) -> SufResult:
    if method == "exact":
        return suf_exact(reduced, **kwargs)
    if method == "single":
        return suf_single(reduced, **kwargs)
    if method == "fibonacci":
        return suf_fibonacci(reduced, **kwargs)
    if method == "affine":
        return suf_affine(reduced, **kwargs)
    if method == "quadratic":
        return suf_quadratic(reduced, **kwargs)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def sample_ball(n: int, radius: float, rng, boundary_fraction: float = 0.5) -> np.ndarray:
    """Points in the 3-D ball; a fraction of them exactly on the sphere."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.uniform(size=n) ** (1.0 / 3.0)
    n_edge = int(boundary_fraction * n)
    r[:n_edge] = radius
    return v * r[:, None]


def replay_certificate(reduced: ReducedSystem, result: SufResult, n_samples: int = 1000,
                       seed: int = 0, system: ConstraintSystem | None = None) -> float:
    """Worst violation of the certificate's law over random forces with |F| <= rho.

    Rows are checked in the units of the reduced system; when ``system`` is
    given the full ``(F, tau, lambda)`` vector is also checked against it,
    including the dynamics residual.
    """
    if result.certificate is None:
        raise ValueError("result carries no decision-rule certificate")
    rng = np.random.default_rng(seed)
    A, b = reduced.halfspaces(include_cap=False)
    worst = 0.0
    for F in sample_ball(n_samples, result.rho, rng):
        dQ = result.certificate.recourse(F)
        z = np.concatenate([F, dQ])
        worst = max(worst, float(np.max(A @ z - b, initial=0.0)))
        if system is not None:
            x = reduced.to_full(F, dQ)
            worst = max(worst, system.residual(x), system.violation(x))
    return worst
