"""Conic programming front end: LP, QP, SOCP and SDP behind one problem type.

Problems are stated as

    maximise    c @ x  (- 0.5 x @ P @ x for QPs)
    subject to  A_eq @ x == b_eq
                h_k - G_k @ x  in  K_k     for every cone block k

with ``K_k`` the nonnegative orthant, a second-order cone
``{(t, v): |v| <= t}`` or the cone of symmetric positive semidefinite
matrices.  PSD blocks store the full column-major ``vec`` of the matrix.

LPs go to HiGHS; everything else goes to Clarabel.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import clarabel
import highspy
import numpy as np
import scipy.sparse as sp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric-failure"

CONE_KINDS = ("nonnegative", "second_order", "psd")

FEAS_TOL = 1e-8
GAP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ConeBlock:
    kind: str
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if G.shape[0] != h.size:
            raise ValueError("cone block G and h row counts differ")
        if self.kind == "psd":
            n = int(round(np.sqrt(h.size)))
            if n * n != h.size:
                raise ValueError("psd block size is not a square")
            if not np.allclose(h.reshape(n, n), h.reshape(n, n).T):
                raise ValueError("psd block constant term is not symmetric")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def size(self) -> int:
        return self.h.size

    @property
    def order(self) -> int:
        """Matrix order for PSD blocks, vector length otherwise."""
        if self.kind == "psd":
            return int(round(np.sqrt(self.size)))
        return self.size

    def slack(self, x):
        return self.h - self.G @ x


@dataclass(frozen=True, eq=False)
class ConicProblem:
    c: np.ndarray
    blocks: tuple = ()
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    P: np.ndarray | None = None
    layout: dict = field(default_factory=dict)
    feas_tol: float = FEAS_TOL
    gap_tol: float = GAP_TOL

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        object.__setattr__(self, "c", c)
        n = c.size
        for block in self.blocks:
            if block.G.shape[1] != n:
                raise ValueError("cone block column count does not match c")
        if self.A_eq is not None:
            A = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            b = np.asarray(self.b_eq, dtype=float).reshape(-1)
            if A.shape != (b.size, n):
                raise ValueError("equality block has inconsistent shape")
            object.__setattr__(self, "A_eq", A)
            object.__setattr__(self, "b_eq", b)
        if self.P is not None:
            P = np.asarray(self.P, dtype=float)
            if P.shape != (n, n):
                raise ValueError("P must be n x n")
            object.__setattr__(self, "P", 0.5 * (P + P.T))

    @property
    def n_vars(self) -> int:
        return self.c.size

    def kinds(self) -> set:
        return {b.kind for b in self.blocks}

    def violation(self, x) -> float:
        """Largest constraint violation of ``x``; cones measured by distance."""
        worst = 0.0
        if self.A_eq is not None and self.A_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        for block in self.blocks:
            s = block.slack(x)
            if block.kind == "nonnegative":
                worst = max(worst, float(np.max(-s, initial=0.0)))
            elif block.kind == "second_order":
                worst = max(worst, float(np.linalg.norm(s[1:]) - s[0]))
            else:
                n = block.order
                S = s.reshape(n, n, order="F")
                worst = max(worst, float(-np.linalg.eigvalsh(0.5 * (S + S.T))[0]))
        return max(worst, 0.0)

    def to_json(self) -> str:
        """Self-describing dump for offline debugging."""
        doc = {
            "objective": "maximise",
            "c": self.c.tolist(),
            "P": None if self.P is None else self.P.tolist(),
            "A_eq": None if self.A_eq is None else self.A_eq.tolist(),
            "b_eq": None if self.b_eq is None else self.b_eq.tolist(),
            "blocks": [{"kind": b.kind, "G": b.G.tolist(), "h": b.h.tolist()}
                       for b in self.blocks],
            "layout": {k: [s.start, s.stop] for k, s in self.layout.items()},
            "feas_tol": self.feas_tol,
            "gap_tol": self.gap_tol,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ConicProblem":
        doc = json.loads(text)
        blocks = tuple(ConeBlock(b["kind"], np.array(b["G"]), np.array(b["h"]))
                       for b in doc["blocks"])
        return cls(
            c=np.array(doc["c"]),
            blocks=blocks,
            A_eq=None if doc["A_eq"] is None else np.array(doc["A_eq"]),
            b_eq=None if doc["b_eq"] is None else np.array(doc["b_eq"]),
            P=None if doc["P"] is None else np.array(doc["P"]),
            layout={k: slice(*v) for k, v in doc["layout"].items()},
            feas_tol=doc["feas_tol"],
            gap_tol=doc["gap_tol"],
        )


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    status: str
    objective: float = float("nan")
    x: np.ndarray | None = None
    solve_time: float = 0.0
    dual_objective: float = float("nan")
    violation: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


# --------------------------------------------------------------------------
# LP backend (HiGHS)


_SETTLED = (highspy.HighsModelStatus.kOptimal, highspy.HighsModelStatus.kInfeasible,
            highspy.HighsModelStatus.kUnbounded)


class LPModel:
    """A HiGHS model kept alive between solves so that small edits warm start.

    Rows are ``G @ x <= h`` and ``A_eq @ x == b_eq``; equality rows come
    first in the row numbering.  Column bounds default to free.
    """

    def __init__(self, c, G=None, h=None, A_eq=None, b_eq=None, lower=None, upper=None,
                 feas_tol: float = 1e-9):
        c = np.asarray(c, dtype=float)
        n = c.size
        inf = highspy.kHighsInf
        rows, lo, hi = [], [], []
        if A_eq is not None and len(A_eq):
            A_eq = np.atleast_2d(A_eq)
            rows.append(A_eq)
            lo.append(np.asarray(b_eq, float))
            hi.append(np.asarray(b_eq, float))
        self.n_eq = sum(r.shape[0] for r in rows)
        if G is not None and len(G):
            G = np.atleast_2d(G)
            rows.append(G)
            lo.append(np.full(G.shape[0], -inf))
            hi.append(np.asarray(h, float))
        M = sp.csc_matrix(np.vstack(rows) if rows else np.zeros((0, n)))
        lp = highspy.HighsLp()
        lp.num_col_ = n
        lp.num_row_ = M.shape[0]
        lp.col_cost_ = c
        lp.col_lower_ = np.full(n, -inf) if lower is None else np.where(np.isfinite(lower), lower, -inf)
        lp.col_upper_ = np.full(n, inf) if upper is None else np.where(np.isfinite(upper), upper, inf)
        lp.row_lower_ = np.concatenate(lo) if lo else np.zeros(0)
        lp.row_upper_ = np.concatenate(hi) if hi else np.zeros(0)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = M.indptr
        lp.a_matrix_.index_ = M.indices
        lp.a_matrix_.value_ = M.data
        lp.sense_ = highspy.ObjSense.kMaximize
        self._h = highspy.Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.setOptionValue("primal_feasibility_tolerance", feas_tol)
        self._h.setOptionValue("dual_feasibility_tolerance", feas_tol)
        self._h.passModel(lp)
        self.n = n

    def set_cost(self, c):
        c = np.asarray(c, dtype=float)
        self._h.changeColsCost(self.n, np.arange(self.n, dtype=np.int32), c)

    def set_coeff(self, row: int, col: int, value: float):
        self._h.changeCoeff(int(row), int(col), float(value))

    def solve(self, cold: bool = False) -> SolveOutcome:
        """Solve from the last basis, or from scratch with ``cold``."""
        t0 = time.perf_counter()
        if cold:
            self._h.clearSolver()
        self._h.run()
        status = self._h.getModelStatus()
        if status not in _SETTLED:
            # presolve could not tell or simplex lost accuracy: retry
            # without presolve, then with the interior point solver
            for option, value in (("presolve", "off"), ("solver", "ipm")):
                self._h.setOptionValue(option, value)
                self._h.clearSolver()
                self._h.run()
                status = self._h.getModelStatus()
                if status in _SETTLED:
                    break
            self._h.setOptionValue("presolve", "choose")
            self._h.setOptionValue("solver", "choose")
        elapsed = time.perf_counter() - t0
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.array(self._h.getSolution().col_value)
            obj = float(self._h.getInfo().objective_function_value)
            return SolveOutcome(OPTIMAL, obj, x, elapsed, dual_objective=obj)
        if status == highspy.HighsModelStatus.kInfeasible:
            return SolveOutcome(INFEASIBLE, solve_time=elapsed)
        if status in (highspy.HighsModelStatus.kUnbounded,
                      highspy.HighsModelStatus.kUnboundedOrInfeasible):
            return SolveOutcome(UNBOUNDED, solve_time=elapsed)
        return SolveOutcome(NUMERIC_FAILURE, solve_time=elapsed)


def solve_lp(problem: ConicProblem) -> SolveOutcome:
    if problem.kinds() - {"nonnegative"} or problem.P is not None:
        raise ValueError("solve_lp accepts only nonnegative cone blocks and no P")
    G = np.vstack([b.G for b in problem.blocks]) if problem.blocks else None
    h = np.concatenate([b.h for b in problem.blocks]) if problem.blocks else None
    model = LPModel(problem.c, G, h, problem.A_eq, problem.b_eq,
                    feas_tol=min(problem.feas_tol, 1e-9))
    out = model.solve()
    if out.ok:
        out = SolveOutcome(out.status, out.objective, out.x, out.solve_time,
                           out.dual_objective, problem.violation(out.x))
    return out


# --------------------------------------------------------------------------
# Clarabel backend


def _svec_rows(n: int):
    """Indices into a column-major vec(S) and scale factors for Clarabel's
    upper-triangle column-major svec."""
    idx, scale = [], []
    for j in range(n):
        for i in range(j + 1):
            idx.append(i + n * j)
            scale.append(1.0 if i == j else np.sqrt(2.0))
    return np.array(idx), np.array(scale)


def _clarabel_solve(problem: ConicProblem) -> SolveOutcome:
    n = problem.n_vars
    A_parts, b_parts, cones = [], [], []
    if problem.A_eq is not None and problem.A_eq.shape[0]:
        A_parts.append(problem.A_eq)
        b_parts.append(problem.b_eq)
        cones.append(clarabel.ZeroConeT(problem.A_eq.shape[0]))
    for block in problem.blocks:
        if block.kind == "nonnegative":
            A_parts.append(block.G)
            b_parts.append(block.h)
            cones.append(clarabel.NonnegativeConeT(block.size))
        elif block.kind == "second_order":
            A_parts.append(block.G)
            b_parts.append(block.h)
            cones.append(clarabel.SecondOrderConeT(block.size))
        else:
            m = block.order
            idx, scale = _svec_rows(m)
            # symmetrise the linear map before packing
            G = block.G.reshape(m, m, n, order="F")
            G = 0.5 * (G + G.transpose(1, 0, 2)).reshape(m * m, n, order="F")
            A_parts.append(G[idx] * scale[:, None])
            b_parts.append(block.h[idx] * scale)
            cones.append(clarabel.PSDTriangleConeT(m))
    A = sp.csc_matrix(np.vstack(A_parts)) if A_parts else sp.csc_matrix((0, n))
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    P = sp.triu(sp.csc_matrix(problem.P), format="csc") if problem.P is not None \
        else sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = problem.feas_tol
    settings.tol_gap_abs = problem.gap_tol
    settings.tol_gap_rel = problem.gap_tol
    settings.max_iter = 200
    t0 = time.perf_counter()
    solution = clarabel.DefaultSolver(P, -problem.c, A, b, cones, settings).solve()
    elapsed = time.perf_counter() - t0

    status = str(solution.status)
    if status == "Solved":
        x = np.array(solution.x)
        return SolveOutcome(OPTIMAL, -float(solution.obj_val), x, elapsed,
                            -float(solution.obj_val_dual), problem.violation(x))
    if status == "AlmostSolved":
        x = np.array(solution.x)
        viol = problem.violation(x)
        if viol <= 100 * problem.feas_tol:
            return SolveOutcome(OPTIMAL, -float(solution.obj_val), x, elapsed,
                                -float(solution.obj_val_dual), viol)
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SolveOutcome(INFEASIBLE, solve_time=elapsed)
    if status in ("DualInfeasible", "AlmostDualInfeasible"):
        return SolveOutcome(UNBOUNDED, solve_time=elapsed)
    return SolveOutcome(NUMERIC_FAILURE, solve_time=elapsed)


def solve_socp(problem: ConicProblem) -> SolveOutcome:
    if "psd" in problem.kinds():
        raise ValueError("solve_socp does not accept PSD blocks")
    return _clarabel_solve(problem)


def solve_sdp(problem: ConicProblem) -> SolveOutcome:
    return _clarabel_solve(problem)


def solve_qp(problem: ConicProblem) -> SolveOutcome:
    """Maximise ``c @ x - 0.5 x @ P @ x``; ``P`` must be positive semidefinite."""
    if problem.P is None:
        raise ValueError("solve_qp needs a quadratic term")
    return _clarabel_solve(problem)


def solve(problem: ConicProblem) -> SolveOutcome:
    """Dispatch on the cone classes present."""
    kinds = problem.kinds()
    if problem.P is not None:
        return solve_qp(problem)
    if "psd" in kinds:
        return solve_sdp(problem)
    if "second_order" in kinds:
        return solve_socp(problem)
    return solve_lp(problem)
