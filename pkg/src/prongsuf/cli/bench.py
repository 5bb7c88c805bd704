"""Random instances and the method benchmark.

Two scenario kinds:

* ``teleoperation``: no arm, three feet on the ground, the lifted LF foot is
  the end-effector.
* ``manipulation``: four feet on the ground, the arm tip is the end-effector.
"""
from __future__ import annotations

import csv
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..contacts import Scenario, assemble, reduce
from ..model import (IKError, RobotModel, RobotState, center_of_mass, contact_position, ik_transpose,
                     quat_from_rpy)
from ..robots import LEGS, nominal_joints, quadruped
from ..suf import METHODS, RayShooter, compute_suf

SCENARIOS = ("teleoperation", "manipulation")
CSV_HEADER = ("scenario", "seed", "method", "rho", "ratio_to_exact", "time_ms", "status")
JOINT_SPREAD = 0.4
HEIGHT_RANGE = (0.3, 0.55)
TILT = 0.1
MAX_TRIES = 100


class SamplingError(RuntimeError):
    pass


def scenario_model(kind: str) -> RobotModel:
    if kind == "teleoperation":
        return quadruped(arm=False, prongs=False)
    if kind == "manipulation":
        return quadruped(arm=True, prongs=False)
    raise ValueError(f"unknown scenario kind {kind!r}; expected one of {SCENARIOS}")


def scenario_for(kind: str) -> Scenario:
    feet = [f"{leg}_foot" for leg in LEGS]
    if kind == "teleoperation":
        return Scenario(feet[1:], feet[0])
    if kind == "manipulation":
        return Scenario(feet, "arm_tip")
    raise ValueError(f"unknown scenario kind {kind!r}; expected one of {SCENARIOS}")


def _draw(model: RobotModel, scenario: Scenario, rng) -> RobotState | None:
    lower, upper = model.joint_limits
    nominal = nominal_joints(model)
    half = JOINT_SPREAD * (upper - lower)
    joints = np.clip(nominal + rng.uniform(-half, half), lower, upper)
    rpy = rng.uniform(-TILT, TILT, size=3)
    height = rng.uniform(*HEIGHT_RANGE)
    seed = RobotState.from_parts(model, (0.0, 0.0, height), quat_from_rpy(rpy), joints)
    feet = np.array([contact_position(model, seed, n)[:2] for n in scenario.active_contacts])
    # slide the footprint so its centroid sits under the CoM
    feet = feet + center_of_mass(model, seed)[:2] - feet.mean(axis=0)
    targets = {n: np.array([p[0], p[1], 0.0]) for n, p in zip(scenario.active_contacts, feet)}
    try:
        state = ik_transpose(model, targets, seed, max_iter=1000, tol=1e-7)
    except IKError:
        return None
    if contact_position(model, state, scenario.end_effector)[2] < 0.0:
        return None
    system = assemble(model, state, scenario)
    reduced = reduce(system)
    if reduced.status != "ok" or not RayShooter(reduced).origin_feasible():
        return None
    return state


def sample_instance(model: RobotModel, kind: str, seed: int) -> RobotState:
    """One feasible random posture, deterministic in ``seed``."""
    scenario = scenario_for(kind)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_TRIES):
        state = _draw(model, scenario, rng)
        if state is not None:
            return state
    raise SamplingError(f"no feasible {kind} posture in {MAX_TRIES} draws; widen the sampling bounds")


def sample_configurations(model: RobotModel, kind: str, n: int, seed: int) -> list:
    """``n`` feasible postures; instance ``i`` is drawn from seed ``seed + i``.

    Postures are joint angles uniform within +-40% of each joint range around
    the nominal stance, a random torso height and small tilt.  The footprint
    is slid horizontally until its centroid lies under the CoM, IK puts every
    active foot on the ground there, and the posture is kept only if the
    robot can hold it with no disturbance.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    return [sample_instance(model, kind, seed + i) for i in range(n)]


@dataclass(frozen=True)
class BenchRecord:
    scenario: str
    seed: int
    method: str
    rho: float
    ratio_to_exact: float | None
    time_ms: float
    status: str

    def row(self) -> list:
        ratio = "" if self.ratio_to_exact is None else repr(self.ratio_to_exact)
        return [self.scenario, self.seed, self.method, repr(self.rho), ratio,
                f"{self.time_ms:.6f}", self.status]


def _timed(reduced, method, repeats):
    results = [compute_suf(reduced, method) for _ in range(max(1, repeats))]
    times = [r.wall_time * 1e3 for r in results]
    return results[0], times


def run_instance(kind: str, seed: int, methods=METHODS, repeats: int = 1):
    """All methods on one instance; returns (records, median times per method)."""
    model = scenario_model(kind)
    try:
        state = sample_instance(model, kind, seed)
    except SamplingError:
        return [BenchRecord(kind, seed, m, float("nan"), None, 1e-6, "sampling-failed")
                for m in methods], {}
    reduced = reduce(assemble(model, state, scenario_for(kind)))
    outcomes = {m: _timed(reduced, m, repeats) for m in methods}
    exact = outcomes.get("exact", (None,))[0]
    rho_exact = exact.rho if exact is not None and exact.status == "ok" and exact.rho > 0 else None
    records, medians = [], {}
    for m, (res, times) in outcomes.items():
        ratio = res.rho / rho_exact if rho_exact is not None and np.isfinite(res.rho) else None
        records.append(BenchRecord(kind, seed, m, float(res.rho), ratio,
                                   max(times[0], 1e-6), res.status))
        medians[m] = statistics.median(times)
    return records, medians


def _run_one(args):
    return run_instance(*args)


def run_benchmark(n_per_scenario: int, seed: int = 0, methods=METHODS, scenarios=SCENARIOS,
                  repeats: int = 3, workers: int = 1):
    """Benchmark every method on ``n_per_scenario`` random instances per kind.

    Records carry the first-run time; the summary uses the median of
    ``repeats`` runs per instance.  Failures are recorded, never raised.
    """
    jobs = [(kind, seed + i, tuple(methods), repeats)
            for kind in scenarios for i in range(n_per_scenario)]
    if workers > 1 and jobs:
        with ProcessPoolExecutor(workers) as pool:
            outputs = list(pool.map(_run_one, jobs))
    else:
        outputs = [_run_one(j) for j in jobs]
    records, timings = [], []
    for (kind, s, _, _), (recs, medians) in zip(jobs, outputs):
        records += recs
        timings.append((kind, medians))
    order = {m: i for i, m in enumerate(METHODS)}
    records.sort(key=lambda r: (r.scenario, r.seed, order.get(r.method, len(order))))
    return records, summarize(records, timings)


def _quartiles(values):
    if not values:
        return None
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return dict(zip(("min", "q1", "median", "q3", "max"), map(float, q)))


def summarize(records, timings=None) -> dict:
    """Per scenario and method: median time and ratio quartiles."""
    summary = {}
    for kind in sorted({r.scenario for r in records}):
        per = {}
        for m in dict.fromkeys(r.method for r in records if r.scenario == kind):
            recs = [r for r in records if r.scenario == kind and r.method == m]
            if timings:
                times = [t[m] for k, t in timings if k == kind and m in t]
            else:
                times = [r.time_ms for r in recs]
            per[m] = {
                "instances": len(recs),
                "failed": sum(r.status == "numeric-failure" for r in recs),
                "median_time_ms": statistics.median(times) if times else None,
                "ratio": _quartiles([r.ratio_to_exact for r in recs if r.ratio_to_exact is not None]),
            }
        summary[kind] = per
    return summary


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def read_records_csv(path) -> list:
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            ratio = row["ratio_to_exact"]
            out.append(BenchRecord(row["scenario"], int(row["seed"]), row["method"],
                                   float(row["rho"]), float(ratio) if ratio else None,
                                   float(row["time_ms"]), row["status"]))
        return out
