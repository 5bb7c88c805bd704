"""Posture and prong-placement optimisation, and the torso-height sweep.

The design vector is ``(x_f, y_f, b_z)``: feet at ``(+-x_f, +-y_f, 0)`` and
the torso at height ``b_z``.  Prongs hang straight down from the torso and
their length always equals ``b_z``, so they touch the ground whatever the
height.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .contacts import Scenario, assemble, reduce
from .model import IKError, RobotModel, RobotState
from .robots import LEGS, PRONG_X, standing_state
from .suf import compute_suf

EE_TARGET = (0.8, 0.2, 0.4)
DEFAULT_BOUNDS = ((0.05, 0.5), (0.05, 0.4), (0.25, 0.58))
INITIAL_STEP = 0.05
MIN_STEP = 1e-3
SWEEP_HEADER = ("b_z", "rho_prong", "rho_noprong", "x_f", "y_f")
FEET = tuple(f"{leg}_foot" for leg in LEGS)


@dataclass(frozen=True)
class DesignVariables:
    x_f: float
    y_f: float
    b_z: float
    prong_x: float = PRONG_X

    def __post_init__(self):
        if self.y_f <= 0:
            raise ValueError("y_f must be positive")
        if self.b_z <= 0:
            raise ValueError("b_z must be positive")

    @property
    def prong_length(self) -> float:
        return self.b_z

    def as_array(self) -> np.ndarray:
        return np.array([self.x_f, self.y_f, self.b_z])

    @classmethod
    def from_array(cls, x, prong_x: float = PRONG_X) -> "DesignVariables":
        return cls(float(x[0]), float(x[1]), float(x[2]), prong_x)


@dataclass
class Evaluation:
    variables: DesignVariables
    rho: float
    feasible: bool
    status: str
    state: RobotState | None = None


@dataclass
class DesignResult:
    variables: DesignVariables
    rho: float
    evaluations: list = field(default_factory=list)

    @property
    def best_probe(self) -> float:
        return max((e.rho for e in self.evaluations if e.feasible), default=-np.inf)


def has_prongs(model: RobotModel) -> bool:
    return bool(model.contacts_of_kind("prong"))


def design_model(model: RobotModel, variables: DesignVariables) -> RobotModel:
    """The model with prong contacts moved to ``(+-prong_x, 0, -b_z)``."""
    for name in model.contacts_of_kind("prong"):
        prong = model.contact(name)
        sign = 1.0 if prong.offset[0] >= 0 else -1.0
        model = model.with_contact_offset(
            name, (sign * variables.prong_x, 0.0, -variables.prong_length))
    return model


def manipulation_scenario(model: RobotModel) -> Scenario:
    active = [c.name for c in model.contacts if c.kind in ("foot", "prong")]
    return Scenario(active, "arm_tip")


def evaluate_design(model: RobotModel, variables: DesignVariables, ee_target=EE_TARGET,
                    method: str = "affine") -> Evaluation:
    """SUF of the manipulation scenario at the IK posture for ``variables``.

    IK failures and unreachable targets give ``rho = -inf`` and
    ``feasible = False``.
    """
    model = design_model(model, variables)
    try:
        state = standing_state(model, height=variables.b_z, x_f=variables.x_f,
                               y_f=variables.y_f, ee_target=ee_target, tol=1e-6)
    except IKError:
        return Evaluation(variables, -np.inf, False, "ik-failed")
    reduced = reduce(assemble(model, state, manipulation_scenario(model)))
    result = compute_suf(reduced, method)
    if result.status not in ("ok",):
        return Evaluation(variables, 0.0 if result.status != "numeric-failure" else -np.inf,
                          result.status != "numeric-failure", result.status, state)
    return Evaluation(variables, result.rho, True, "ok", state)


def pattern_search(objective, x0, lower, upper, mask=None, step: float = INITIAL_STEP,
                   min_step: float = MIN_STEP):
    """Coordinate pattern search maximising ``objective`` over a box.

    Tries ``+step`` then ``-step`` along each free coordinate, keeps any
    strict improvement, halves the step once a full pass fails, and stops
    below ``min_step``.  Returns ``(x, value)``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    free = np.ones(len(x), bool) if mask is None else np.asarray(mask, bool)
    value = objective(x)
    while step >= min_step:
        improved = False
        for i in np.flatnonzero(free):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[i] = np.clip(x[i] + sign * step, lower[i], upper[i])
                if trial[i] == x[i]:
                    continue
                v = objective(trial)
                if v > value + 1e-9 * max(1.0, abs(value)):
                    x, value, improved = trial, v, True
                    break
        if not improved:
            step *= 0.5
    return x, value


def optimize_design(model: RobotModel, ee_target=EE_TARGET, bounds=DEFAULT_BOUNDS,
                    method: str = "affine", start=None, fixed_height: float | None = None,
                    seed: int = 0, restarts: int = 0, prong_x: float = PRONG_X) -> DesignResult:
    """Maximise the SUF over ``(x_f, y_f, b_z)`` inside ``bounds``.

    ``fixed_height`` freezes ``b_z``.  Extra random starts (``restarts``) are
    drawn from ``seed``; the result is deterministic for fixed arguments.
    Raises ValueError when every probed point is infeasible.
    """
    bounds = np.asarray(bounds, dtype=float)
    lower, upper = bounds[:, 0].copy(), bounds[:, 1].copy()
    if np.any(lower > upper):
        raise ValueError("empty design box")
    mask = np.ones(3, bool)
    if fixed_height is not None:
        lower[2] = upper[2] = fixed_height
        mask[2] = False
    if start is None:
        start = 0.5 * (lower + upper)
        start[:2] = np.clip([0.3, 0.2], lower[:2], upper[:2])
    cache = {}
    evaluations = []

    def objective(x):
        key = tuple(np.round(x, 9))
        if key not in cache:
            ev = evaluate_design(model, DesignVariables.from_array(x, prong_x), ee_target, method)
            evaluations.append(ev)
            cache[key] = ev.rho
        return cache[key]

    rng = np.random.default_rng(seed)
    starts = [np.asarray(start, dtype=float)]
    starts += [np.where(mask, rng.uniform(lower, upper), lower) for _ in range(restarts)]
    best_x, best = None, -np.inf
    for s in starts:
        x, v = pattern_search(objective, s, lower, upper, mask)
        if v > best:
            best_x, best = x, v
    if not np.isfinite(best):
        raise ValueError("no feasible design inside the bounds")
    # the search only moves on improvement, so best dominates every probe
    return DesignResult(DesignVariables.from_array(best_x, prong_x), best, evaluations)


@dataclass
class SweepRow:
    b_z: float
    rho_prong: float
    rho_noprong: float
    x_f: float
    y_f: float
    feasible: bool = True

    @property
    def benefit(self) -> float:
        if not self.feasible or self.rho_noprong <= 0:
            return float("nan")
        return self.rho_prong / self.rho_noprong


def sweep_height(model: RobotModel, heights, ee_target=EE_TARGET, method: str = "affine",
                 bounds=DEFAULT_BOUNDS, prong_x: float = PRONG_X) -> list:
    """Per height: optimise feet without prongs, then with prongs from that optimum.

    Seeding the prong search at the no-prong optimum makes
    ``rho_prong >= rho_noprong`` hold by construction, since grounded prongs
    only add feasible support at an identical posture.  Unreachable heights
    come back with ``feasible = False``.  Rows are sorted by height whatever
    the input order, and each row depends only on its own height.
    """
    heights = sorted({float(h) for h in heights})
    with_prongs = model if has_prongs(model) else None
    if with_prongs is None:
        raise ValueError("sweep needs a model with prong contacts")
    without = model.without_contacts(model.contacts_of_kind("prong"))
    rows = []
    for h in heights:
        try:
            plain = optimize_design(without, ee_target, bounds, method, fixed_height=h, prong_x=prong_x)
        except ValueError:
            rows.append(SweepRow(h, float("nan"), float("nan"), float("nan"), float("nan"), False))
            continue
        pronged = optimize_design(with_prongs, ee_target, bounds, method,
                                  start=plain.variables.as_array(), fixed_height=h, prong_x=prong_x)
        v = pronged.variables
        rows.append(SweepRow(h, pronged.rho, plain.rho, v.x_f, v.y_f))
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([repr(float(x)) for x in (r.b_z, r.rho_prong, r.rho_noprong, r.x_f, r.y_f)])


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [SweepRow(float(r["b_z"]), float(r["rho_prong"]), float(r["rho_noprong"]),
                         float(r["x_f"]), float(r["y_f"]), not np.isnan(float(r["rho_prong"])))
                for r in reader]
