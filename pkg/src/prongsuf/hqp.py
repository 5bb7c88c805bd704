"""Single-timestep hierarchical whole-body QP.

Decision variables ``x = (qddot, tau, lambda)``.  Hard constraints are the
equation of motion, stationary contacts, friction pyramids and torque
limits.  Layers, highest priority first:

1. dynamic feasibility (hard constraints only)
2. torso angular acceleration tracking
3. torso translational acceleration tracking
4. swing-foot acceleration tracking
5. weighted torque minimisation

Each layer is a least-squares QP over the coordinates left free by the layers
above.  Its optimal set is ``{A_k x = A_k x*}`` inside the feasible region,
so that equality is substituted out through a nullspace basis before the
next layer runs.  A final minimum-norm step picks a unique point.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .contacts import friction_halfspaces, torque_halfspaces
from .model import (RobotModel, RobotState, check_state, contact_bias_acceleration,
                    contact_jacobians, dynamics_bias, mass_matrix)
from .solver import ConeBlock, ConicProblem, solve_qp

LAYERS = (1, 2, 3, 4, 5)
LAYER_NAMES = {1: "feasibility", 2: "torso_angular", 3: "torso_linear", 4: "swing_feet",
               5: "torque"}
NULL_TOL = 1e-8
QP_TOL = 1e-10
RETRY_TOLS = (1e-8, 1e-6)
KP = 100.0
KD = 20.0


class HqpInfeasible(RuntimeError):
    """No (qddot, tau, lambda) satisfies the hard constraints."""


def pd_acceleration(error, velocity, kp: float = KP, kd: float = KD) -> np.ndarray:
    """Desired acceleration ``kp * error - kd * velocity``."""
    if kp < 0 or kd < 0:
        raise ValueError("gains must be nonnegative")
    return kp * np.asarray(error, dtype=float) - kd * np.asarray(velocity, dtype=float)


def _vec3(x):
    return np.asarray(x, dtype=float).reshape(3)


@dataclass(eq=False)
class TaskSet:
    torso_angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torso_linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    swing: dict = field(default_factory=dict)
    w_angular: np.ndarray = field(default_factory=lambda: np.ones(3))
    w_linear: np.ndarray = field(default_factory=lambda: np.ones(3))
    w_swing: float = 1.0
    w_torque: np.ndarray | float = 1.0
    kp: float = KP
    kd: float = KD

    def __post_init__(self):
        self.torso_angular = _vec3(self.torso_angular)
        self.torso_linear = _vec3(self.torso_linear)
        self.swing = {k: _vec3(v) for k, v in self.swing.items()}
        self.w_angular = _vec3(np.broadcast_to(self.w_angular, 3))
        self.w_linear = _vec3(np.broadcast_to(self.w_linear, 3))
        weights = [self.w_angular, self.w_linear, np.atleast_1d(self.w_torque), [self.w_swing]]
        if any(np.any(np.asarray(w) < 0) for w in weights):
            raise ValueError("task weights must be nonnegative")
        if self.kp < 0 or self.kd < 0:
            raise ValueError("gains must be nonnegative")

    @classmethod
    def tracking(cls, angular_error=(0, 0, 0), angular_velocity=(0, 0, 0),
                 linear_error=(0, 0, 0), linear_velocity=(0, 0, 0), swing_errors=None,
                 swing_velocities=None, kp: float = KP, kd: float = KD, **weights) -> "TaskSet":
        """Targets from pose errors through the PD law."""
        swing_errors = swing_errors or {}
        swing_velocities = swing_velocities or {}
        swing = {k: pd_acceleration(e, swing_velocities.get(k, np.zeros(3)), kp, kd)
                 for k, e in swing_errors.items()}
        return cls(pd_acceleration(angular_error, angular_velocity, kp, kd),
                   pd_acceleration(linear_error, linear_velocity, kp, kd), swing,
                   kp=kp, kd=kd, **weights)

    def to_dict(self) -> dict:
        return {"torso_angular": self.torso_angular.tolist(),
                "torso_linear": self.torso_linear.tolist(),
                "swing": {k: v.tolist() for k, v in self.swing.items()},
                "w_angular": self.w_angular.tolist(), "w_linear": self.w_linear.tolist(),
                "w_swing": self.w_swing, "w_torque": np.asarray(self.w_torque).tolist(),
                "kp": self.kp, "kd": self.kd}

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskSet":
        doc = dict(doc)
        if isinstance(doc.get("w_torque"), list):
            doc["w_torque"] = np.array(doc["w_torque"], dtype=float)
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TaskSet":
        return cls.from_dict(json.loads(text))


@dataclass(eq=False)
class HqpSolution:
    qddot: np.ndarray
    tau: np.ndarray
    lam: np.ndarray
    contacts: tuple
    objectives: dict
    skipped: tuple = ()
    layers: tuple = LAYERS

    def contact_force(self, name: str) -> np.ndarray:
        i = self.contacts.index(name)
        return self.lam[3 * i:3 * i + 3]

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.qddot, self.tau, self.lam])

    def to_dict(self) -> dict:
        return {"qddot": self.qddot.tolist(), "tau": self.tau.tolist(),
                "lambda": {c: self.contact_force(c).tolist() for c in self.contacts},
                "objectives": {LAYER_NAMES[k]: v for k, v in self.objectives.items()},
                "skipped": [LAYER_NAMES[k] for k in self.skipped],
                "layers": list(self.layers)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(eq=False)
class _Problem:
    A_eq: np.ndarray
    b_eq: np.ndarray
    G: np.ndarray
    h: np.ndarray
    tasks: dict  # layer -> (A, a, sqrt weights)


def build_problem(model: RobotModel, state: RobotState, contacts, tasks: TaskSet) -> _Problem:
    check_state(model, state)
    contacts = tuple(contacts)
    nv, nj, nc = model.nv, model.n_joints, len(contacts)
    n = nv + nj + 3 * nc
    M = mass_matrix(model, state)
    h = dynamics_bias(model, state)
    B = model.selection_matrix()
    rows, rhs = [np.hstack([M, -B, np.zeros((nv, 3 * nc))])], [-h]
    if nc:
        J = contact_jacobians(model, state, contacts)
        rows[0][:, nv + nj:] = -J.T
        rows.append(np.hstack([J, np.zeros((3 * nc, nj + 3 * nc))]))
        rhs.append(-contact_bias_acceleration(model, state, contacts))
    G_rows, h_rows = [], []
    for i in range(nc):
        Gf, hf = friction_halfspaces(model.friction_mu, i, nc)
        G_rows.append(np.hstack([np.zeros((5, nv + nj)), Gf]))
        h_rows.append(hf)
    Gt, ht = torque_halfspaces(model.torque_limits)
    G_rows.append(np.hstack([np.zeros((2 * nj, nv)), Gt, np.zeros((2 * nj, 3 * nc))]))
    h_rows.append(ht)

    def select(cols):
        S = np.zeros((len(cols), n))
        S[np.arange(len(cols)), cols] = 1.0
        return S

    layer_tasks = {}
    if model.floating_base:
        layer_tasks[2] = (select([3, 4, 5]), tasks.torso_angular, np.sqrt(tasks.w_angular))
        layer_tasks[3] = (select([0, 1, 2]), tasks.torso_linear, np.sqrt(tasks.w_linear))
    if tasks.swing:
        names = list(tasks.swing)
        overlap = set(names) & set(contacts)
        if overlap:
            raise ValueError(f"swing targets on stance contacts: {sorted(overlap)}")
        Js = contact_jacobians(model, state, names)
        A = np.hstack([Js, np.zeros((3 * len(names), nj + 3 * nc))])
        a = np.concatenate([tasks.swing[k] for k in names]) \
            - contact_bias_acceleration(model, state, names)
        layer_tasks[4] = (A, a, np.full(3 * len(names), np.sqrt(tasks.w_swing)))
    wt = np.broadcast_to(np.asarray(tasks.w_torque, dtype=float), (nj,))
    layer_tasks[5] = (select(list(range(nv, nv + nj))), np.zeros(nj), np.sqrt(wt))
    return _Problem(np.vstack(rows), np.concatenate(rhs), np.vstack(G_rows),
                    np.concatenate(h_rows), layer_tasks)


def _null_space(A, tol: float = NULL_TOL) -> np.ndarray:
    if A.size == 0:
        return np.eye(A.shape[1])
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return Vt[rank:].T


def _least_squares_qp(A, r, G, h, tol):
    """argmin 0.5 |A y - r|^2 subject to G y <= h."""
    blocks = (ConeBlock("nonnegative", G, h),) if len(h) else ()
    out = None
    for t in (tol, *(r_tol for r_tol in RETRY_TOLS if r_tol > tol)):
        out = solve_qp(ConicProblem(A.T @ r, blocks, P=A.T @ A, feas_tol=t, gap_tol=t))
        if out.status != "numeric-failure":
            break
    return out


def solve_hqp(model: RobotModel, state: RobotState, contacts, tasks: TaskSet | None = None,
              layers=LAYERS, tol: float = NULL_TOL) -> HqpSolution:
    """Lexicographic solve of the enabled ``layers`` (layer 1 is always on).

    Raises HqpInfeasible when the hard constraints admit no solution.
    """
    tasks = TaskSet() if tasks is None else tasks
    contacts = tuple(contacts)
    layers = tuple(sorted(set(layers) | {1}))
    if not set(layers) <= set(LAYERS):
        raise ValueError(f"layers must be drawn from {LAYERS}")
    prob = build_problem(model, state, contacts, tasks)

    x0, *_ = np.linalg.lstsq(prob.A_eq, prob.b_eq, rcond=None)
    scale = max(1.0, float(np.max(np.abs(prob.b_eq))))
    if np.max(np.abs(prob.A_eq @ x0 - prob.b_eq)) > 1e-9 * scale:
        raise HqpInfeasible("equation of motion and contact constraints are inconsistent")
    Z = _null_space(prob.A_eq, tol)

    # layer 1: any point satisfying the inequalities
    if Z.shape[1] == 0:
        if np.max(prob.G @ x0 - prob.h, initial=0.0) > 1e-9:
            raise HqpInfeasible("no torque- and friction-feasible solution")
        Z = np.zeros((len(x0), 0))
    out = _least_squares_qp(np.zeros((0, Z.shape[1])), np.zeros(0), prob.G @ Z,
                            prob.h - prob.G @ x0, QP_TOL)
    if out.status == "infeasible":
        raise HqpInfeasible("no torque- and friction-feasible solution")
    if not out.ok:
        raise HqpInfeasible(f"feasibility QP failed: {out.status}")
    x0 = x0 + Z @ out.x
    objectives, skipped = {1: 0.0}, []

    for k in layers[1:]:
        if k not in prob.tasks:
            skipped.append(k)
            continue
        A, a, sw = prob.tasks[k]
        At = sw[:, None] * A
        rt = sw * a
        AZ = At @ Z
        if Z.shape[1] == 0 or np.max(np.abs(AZ), initial=0.0) < tol:
            skipped.append(k)
            objectives[k] = float(np.sum((At @ x0 - rt) ** 2))
            continue
        out = _least_squares_qp(AZ, rt - At @ x0, prob.G @ Z, prob.h - prob.G @ x0, QP_TOL)
        if not out.ok:
            raise HqpInfeasible(f"layer {k} QP failed: {out.status}")
        x0 = x0 + Z @ out.x
        objectives[k] = float(np.sum((At @ x0 - rt) ** 2))
        Z = Z @ _null_space(AZ, tol)

    # unique representative: minimum norm within the remaining optimal set
    if Z.shape[1]:
        out = _least_squares_qp(Z, -x0, prob.G @ Z, prob.h - prob.G @ x0, QP_TOL)
        if out.ok:
            x0 = x0 + Z @ out.x
    nv, nj = model.nv, model.n_joints
    return HqpSolution(x0[:nv], x0[nv:nv + nj], x0[nv + nj:], contacts, objectives,
                       tuple(skipped), layers)


def verify_solution(model: RobotModel, state: RobotState, solution: HqpSolution) -> float:
    """Worst residual of the hard constraints, recomputed from scratch."""
    prob = build_problem(model, state, solution.contacts, TaskSet())
    x = solution.x
    eq = float(np.max(np.abs(prob.A_eq @ x - prob.b_eq), initial=0.0))
    ineq = float(np.max(prob.G @ x - prob.h, initial=0.0))
    return max(eq, ineq)
