"""Linear constraint systems over (F, tau, lambda) and their nullspace reduction.

Decision variables are stacked as ``x = (F, tau, lambda)`` where ``F`` is the
world-frame force at the end-effector, ``tau`` the joint torques and
``lambda`` the ground reaction forces of the active contacts.  The equality
block is the quasi-static equation of motion

    B tau + Jc^T lambda + Je^T F = M qddot_d + h(q, qdot) =: d

and the halfspaces are the friction pyramids and torque limits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import (RobotModel, RobotState, check_state, contact_bias_acceleration,
                    contact_jacobians, dynamics_bias, mass_matrix)

RANK_TOL = 1e-8
EQ5_TOL = 1e-8
DEFAULT_FORCE_CAP = 1e4
PYRAMID_SLOPE = np.sqrt(2.0) / 2.0


class ScenarioError(ValueError):
    """The scenario does not fit the model or violates stationary contacts."""


@dataclass(frozen=True, eq=False)
class Scenario:
    active_contacts: tuple
    end_effector: str
    mu: float | None = None
    qddot_d: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "active_contacts", tuple(self.active_contacts))
        if self.qddot_d is not None:
            object.__setattr__(self, "qddot_d", np.asarray(self.qddot_d, dtype=float))
        if not self.active_contacts:
            raise ScenarioError("at least one active contact is required")
        if self.end_effector in self.active_contacts:
            raise ScenarioError("the end-effector cannot also be an active contact")
        if len(set(self.active_contacts)) != len(self.active_contacts):
            raise ScenarioError("duplicate active contacts")
        if self.mu is not None and self.mu < 0:
            raise ScenarioError("friction coefficient must be nonnegative")

    def friction(self, model: RobotModel) -> float:
        return model.friction_mu if self.mu is None else self.mu

    def to_dict(self) -> dict:
        return {
            "active_contacts": list(self.active_contacts),
            "end_effector": self.end_effector,
            "mu": self.mu,
            "qddot_d": None if self.qddot_d is None else self.qddot_d.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        qdd = doc.get("qddot_d")
        return cls(tuple(doc["active_contacts"]), doc["end_effector"], doc.get("mu"),
                   None if qdd is None else np.array(qdd, dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def friction_halfspaces(mu: float, contact_index: int = 0, n_contacts: int = 1):
    """Five rows ``G @ lambda <= 0`` of the linearised friction pyramid.

    Rows act on the stacked contact forces of ``n_contacts`` contacts; only the
    columns of contact ``contact_index`` are nonzero.  Order: unilaterality,
    +x, -x, +y, -y facets.
    """
    if mu < 0:
        raise ValueError("friction coefficient must be nonnegative")
    k = PYRAMID_SLOPE * mu
    local = np.array([
        [0.0, 0.0, -1.0],
        [1.0, 0.0, -k],
        [-1.0, 0.0, -k],
        [0.0, 1.0, -k],
        [0.0, -1.0, -k],
    ])
    G = np.zeros((5, 3 * n_contacts))
    G[:, 3 * contact_index:3 * contact_index + 3] = local
    return G, np.zeros(5)


def torque_halfspaces(torque_limits):
    """Rows ``+-tau_i <= limit_i``, interleaved per joint."""
    limits = np.asarray(torque_limits, dtype=float)
    n = limits.size
    G = np.zeros((2 * n, n))
    G[0::2] = np.eye(n)
    G[1::2] = -np.eye(n)
    return G, np.repeat(limits, 2)


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """``A_eq x = b_eq`` and ``G x <= h`` over ``x = (F, tau, lambda)``."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    G: np.ndarray
    h: np.ndarray
    n_torque: int
    n_lambda: int
    row_labels: tuple = ()

    n_force = 3

    @property
    def n_vars(self) -> int:
        return 3 + self.n_torque + self.n_lambda

    @property
    def force(self) -> slice:
        return slice(0, 3)

    @property
    def torque(self) -> slice:
        return slice(3, 3 + self.n_torque)

    @property
    def contact_forces(self) -> slice:
        return slice(3 + self.n_torque, self.n_vars)

    @property
    def W(self) -> np.ndarray:
        return self.A_eq[:, 3:]

    @property
    def JeT(self) -> np.ndarray:
        return self.A_eq[:, :3]

    def residual(self, x) -> float:
        return float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0))

    def violation(self, x) -> float:
        return float(np.max(self.G @ x - self.h, initial=0.0))

    def contains(self, x, tol: float = 1e-8) -> bool:
        return self.residual(x) <= tol and self.violation(x) <= tol


def validate_stationary_contacts(model: RobotModel, state: RobotState, scenario: Scenario,
                                 tol: float = EQ5_TOL):
    qdd = np.zeros(model.nv) if scenario.qddot_d is None else scenario.qddot_d
    Jc = contact_jacobians(model, state, scenario.active_contacts)
    acc = Jc @ qdd + contact_bias_acceleration(model, state, scenario.active_contacts)
    worst = float(np.max(np.abs(acc), initial=0.0))
    if worst > tol:
        raise ScenarioError(f"desired motion accelerates a stationary contact ({worst:.3e} m/s^2)")


def assemble(model: RobotModel, state: RobotState, scenario: Scenario) -> ConstraintSystem:
    check_state(model, state)
    for name in (*scenario.active_contacts, scenario.end_effector):
        model.contact(name)
    qdd = scenario.qddot_d
    if qdd is None:
        qdd = state.qddot_d
    if qdd.size != model.nv:
        raise ScenarioError("qddot_d has the wrong dimension")
    scenario_eff = Scenario(scenario.active_contacts, scenario.end_effector, scenario.mu, qdd)
    validate_stationary_contacts(model, state, scenario_eff)

    nc = len(scenario.active_contacts)
    nj = model.n_joints
    d = dynamics_bias(model, state)
    if np.any(qdd):
        d = d + mass_matrix(model, state) @ qdd
    Jc = contact_jacobians(model, state, scenario.active_contacts)
    Je = contact_jacobians(model, state, [scenario.end_effector])
    A_eq = np.hstack([Je.T, model.selection_matrix(), Jc.T])

    mu = scenario.friction(model)
    G_rows, h_rows, labels = [], [], []
    for i, name in enumerate(scenario.active_contacts):
        Gf, hf = friction_halfspaces(mu, i, nc)
        G_rows.append(np.hstack([np.zeros((5, 3 + nj)), Gf]))
        h_rows.append(hf)
        labels += [f"{name}:{facet}" for facet in ("normal", "+x", "-x", "+y", "-y")]
    Gt, ht = torque_halfspaces(model.torque_limits)
    G_rows.append(np.hstack([np.zeros((2 * nj, 3)), Gt, np.zeros((2 * nj, 3 * nc))]))
    h_rows.append(ht)
    for name in model.joint_names:
        labels += [f"{name}:+tau", f"{name}:-tau"]
    return ConstraintSystem(A_eq, d, np.vstack(G_rows), np.concatenate(h_rows), nj, 3 * nc,
                            tuple(labels))


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Halfspaces ``A @ (F, dQ) <= b`` after eliminating the dynamics.

    ``(tau, lambda) = W+ (d - Je^T F) + N dQ``.  When ``W`` is rank deficient
    the forces must also satisfy ``C F = c``; a nonzero ``C`` means the set
    of admissible forces is flat.  ``status`` is ``ok``, ``degenerate``
    (flat force set) or ``infeasible``.
    """

    A: np.ndarray
    b: np.ndarray
    W: np.ndarray
    W_pinv: np.ndarray
    N: np.ndarray
    offset: np.ndarray
    JeT: np.ndarray
    d: np.ndarray
    C: np.ndarray
    c: np.ndarray
    status: str
    row_labels: tuple
    n_torque: int
    force_cap: float | None = DEFAULT_FORCE_CAP

    @classmethod
    def from_halfspaces(cls, A, b, n_free: int = 0,
                        force_cap: float | None = DEFAULT_FORCE_CAP) -> "ReducedSystem":
        """A synthetic system given directly by ``A @ (F, dQ) <= b``.

        There is no dynamics behind it: the recourse is ``dQ`` itself.
        """
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.shape != (len(b), 3 + n_free):
            raise ValueError("A must have 3 + n_free columns and one row per entry of b")
        return cls(A, b, np.zeros((0, n_free)), np.zeros((n_free, 0)), np.eye(n_free),
                   np.zeros(n_free), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)),
                   np.zeros(0), "ok", (), n_free, force_cap)

    @property
    def n_free(self) -> int:
        return self.N.shape[1]

    @property
    def dim(self) -> int:
        return 3 + self.n_free

    @property
    def rank(self) -> int:
        return self.W.shape[1] - self.n_free

    def force_map(self) -> np.ndarray:
        """Linear part of ``(F, dQ) -> (tau, lambda)`` for the force block."""
        return -self.W_pinv @ self.JeT

    def to_full(self, F, dQ) -> np.ndarray:
        F = np.asarray(F, dtype=float)
        dQ = np.asarray(dQ, dtype=float).reshape(self.n_free)
        r = self.offset + self.force_map() @ F + self.N @ dQ
        return np.concatenate([F, r])

    def from_full(self, x) -> tuple:
        """Reduced coordinates of a full point; exact only if it satisfies the dynamics."""
        x = np.asarray(x, dtype=float)
        F, r = x[:3], x[3:]
        dQ = self.N.T @ (r - self.offset - self.force_map() @ F)
        return F, dQ

    def halfspaces(self, include_cap: bool = True):
        if not include_cap or self.force_cap is None:
            return self.A, self.b
        cap = np.zeros((6, self.dim))
        cap[:3, :3] = np.eye(3)
        cap[3:, :3] = -np.eye(3)
        return np.vstack([self.A, cap]), np.concatenate([self.b, np.full(6, self.force_cap)])

    def normalized_halfspaces(self, include_cap: bool = True):
        A, b = self.halfspaces(include_cap)
        norms = np.linalg.norm(A, axis=1)
        return A / norms[:, None], b / norms

    def contains(self, F, dQ, tol: float = 1e-8) -> bool:
        z = np.concatenate([np.asarray(F, float), np.asarray(dQ, float).reshape(self.n_free)])
        return bool(np.all(self.A @ z - self.b <= tol))


def reduce(system: ConstraintSystem, force_cap: float | None = DEFAULT_FORCE_CAP,
           rank_tol: float = RANK_TOL) -> ReducedSystem:
    """Eliminate the dynamics equality by ``(tau, lambda) = W+ (d - Je^T F) + N dQ``.

    ``N`` is an orthonormal nullspace basis of ``W = [B, Jc^T]`` from the SVD
    (singular values below ``rank_tol`` relative to the largest count as zero).
    ``force_cap`` bounds every force component; it only guards against
    unbounded force sets and is stored separately from the physical rows.
    """
    W, JeT, d = system.W, system.JeT, system.b_eq
    U, s, Vt = np.linalg.svd(W)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > rank_tol * scale))
    N = Vt[rank:].T.copy()
    W_pinv = (Vt[:rank].T / s[:rank]) @ U[:, :rank].T
    offset = W_pinv @ d
    # components of (d - Je^T F) outside range(W) must vanish
    U_perp = U[:, rank:]
    C = U_perp.T @ JeT
    c = U_perp.T @ d

    G, h = system.G, system.h
    G_F, G_r = G[:, :3], G[:, 3:]
    A = np.hstack([G_F - G_r @ W_pinv @ JeT, G_r @ N])
    b = h - G_r @ offset

    status = "ok"
    force_scale = max(float(np.max(np.abs(d), initial=0.0)), 1.0)
    if C.size and np.max(np.abs(C), initial=0.0) > rank_tol * max(1.0, np.max(np.abs(JeT))):
        status = "degenerate"
    elif c.size and np.max(np.abs(c), initial=0.0) > rank_tol * force_scale:
        status = "infeasible"

    # rows whose reduced coefficients vanish are constants: drop or flag
    row_norm = np.linalg.norm(A, axis=1)
    row_scale = max(float(np.max(row_norm, initial=0.0)), 1.0)
    zero = row_norm <= 1e-12 * row_scale
    if np.any(b[zero] < -1e-9 * max(1.0, float(np.max(np.abs(b), initial=0.0)))):
        status = "infeasible"
    keep = ~zero
    labels = tuple(l for l, k in zip(system.row_labels, keep) if k) if system.row_labels else ()
    return ReducedSystem(A[keep], b[keep], W, W_pinv, N, offset, JeT, d, C, c, status,
                         labels, system.n_torque, force_cap)
