"""Stock robot models: a desk-scale quadruped (with optional arm and prongs)
and the single-body fixture with a closed-form SUF.

The quadruped numbers are configuration defaults, not measured hardware
parameters.
"""
from __future__ import annotations

import numpy as np

from .model import (ContactPoint, IKError, Joint, Link, RobotModel, RobotState,
                    contact_positions, ik_transpose)

LEGS = ("LF", "RF", "LH", "RH")
HIP_X = 0.3
HIP_Y = 0.1
HIP_OFFSET_Y = 0.06
THIGH = 0.3
SHANK = 0.3
ARM_MOUNT = np.array([0.3, 0.0, 0.08])
ARM_SHOULDER = 0.1
ARM_LINK = 0.4
PRONG_X = 0.25

# nominal joint angles per leg (HAA, HFE, KFE) and arm (yaw, pitch, pitch)
NOMINAL_LEG = np.array([0.0, 0.6, -1.2])
NOMINAL_ARM = np.array([0.0, -0.4, 1.2])


def _rod_inertia(mass, length, axis):
    """Thin rod about its centre; ``axis`` is the rod direction index."""
    I = np.full(3, mass * length ** 2 / 12.0)
    I[axis] = 1e-3 * mass
    return np.diag(I)


def _box_inertia(mass, sx, sy, sz):
    return np.diag([mass * (sy ** 2 + sz ** 2), mass * (sx ** 2 + sz ** 2),
                    mass * (sx ** 2 + sy ** 2)]) / 12.0


def leg_sign(leg: str):
    """(sx, sy) placing the leg's hip in the torso quadrant."""
    return (1.0 if leg[1] == "F" else -1.0), (1.0 if leg[0] == "L" else -1.0)


def quadruped(arm: bool = True, prongs: bool = True, torso_mass: float = 30.0,
              leg_link_mass: float = 2.0, arm_link_mass: float = 1.0,
              leg_torque: float = 40.0, arm_torque: float = 150.0,
              prong_x: float = PRONG_X, prong_length: float = 0.4,
              mu: float = 0.6) -> RobotModel:
    links = [Link("torso", torso_mass, np.zeros(3), _box_inertia(torso_mass, 0.6, 0.3, 0.15))]
    joints, contacts = [], []
    for leg in LEGS:
        sx, sy = leg_sign(leg)
        links += [
            Link(f"{leg}_hip", leg_link_mass, [0, sy * 0.03, 0], np.diag([2e-3, 2e-3, 2e-3])),
            Link(f"{leg}_thigh", leg_link_mass, [0, 0, -THIGH / 2], _rod_inertia(leg_link_mass, THIGH, 2)),
            Link(f"{leg}_shank", leg_link_mass, [0, 0, -SHANK / 2], _rod_inertia(leg_link_mass, SHANK, 2)),
        ]
        joints += [
            Joint(f"{leg}_HAA", "torso", f"{leg}_hip", [1, 0, 0], [sx * HIP_X, sy * HIP_Y, 0],
                  lower=-0.6, upper=0.6, torque_limit=leg_torque),
            Joint(f"{leg}_HFE", f"{leg}_hip", f"{leg}_thigh", [0, 1, 0], [0, sy * HIP_OFFSET_Y, 0],
                  lower=-1.5, upper=1.5, torque_limit=leg_torque),
            Joint(f"{leg}_KFE", f"{leg}_thigh", f"{leg}_shank", [0, 1, 0], [0, 0, -THIGH],
                  lower=-2.7, upper=-0.02, torque_limit=leg_torque),
        ]
        contacts.append(ContactPoint(f"{leg}_foot", "foot", f"{leg}_shank", [0, 0, -SHANK]))
    if arm:
        links += [
            Link("arm_base", arm_link_mass, [0, 0, ARM_SHOULDER / 2], np.diag([1e-3, 1e-3, 1e-3])),
            Link("arm_upper", arm_link_mass, [ARM_LINK / 2, 0, 0], _rod_inertia(arm_link_mass, ARM_LINK, 0)),
            Link("arm_fore", arm_link_mass, [ARM_LINK / 2, 0, 0], _rod_inertia(arm_link_mass, ARM_LINK, 0)),
        ]
        joints += [
            Joint("arm_yaw", "torso", "arm_base", [0, 0, 1], ARM_MOUNT,
                  lower=-1.5, upper=1.5, torque_limit=arm_torque),
            Joint("arm_shoulder", "arm_base", "arm_upper", [0, 1, 0], [0, 0, ARM_SHOULDER],
                  lower=-2.0, upper=1.5, torque_limit=arm_torque),
            Joint("arm_elbow", "arm_upper", "arm_fore", [0, 1, 0], [ARM_LINK, 0, 0],
                  lower=0.02, upper=2.8, torque_limit=arm_torque),
        ]
        contacts.append(ContactPoint("arm_tip", "end_effector", "arm_fore", [ARM_LINK, 0, 0]))
    if prongs:
        contacts += [
            ContactPoint("prong_front", "prong", "torso", [prong_x, 0, -prong_length]),
            ContactPoint("prong_hind", "prong", "torso", [-prong_x, 0, -prong_length]),
        ]
    return RobotModel(links, joints, contacts, gravity=[0, 0, -9.81], friction_mu=mu)


def single_body(mass: float = 10.0, mu: float = 0.5, g: float = 9.81) -> RobotModel:
    """One free body touching the ground at its CoM, pushed at its CoM.

    Its SUF is (sqrt(2)/2) mu m g / sqrt(1 + mu^2 / 2).
    """
    links = [Link("body", mass, np.zeros(3), np.diag([0.1, 0.1, 0.1]))]
    contacts = [ContactPoint("ground", "foot", "body"),
                ContactPoint("handle", "end_effector", "body")]
    return RobotModel(links, [], contacts, gravity=[0, 0, -g], friction_mu=mu)


def fixture_suf(mass: float = 10.0, mu: float = 0.5, g: float = 9.81) -> float:
    k = np.sqrt(2.0) / 2.0 * mu
    return k * mass * g / np.sqrt(1.0 + k * k)


def nominal_joints(model: RobotModel) -> np.ndarray:
    out = []
    for joint in model.joints:
        name = joint.name
        if name.startswith("arm_"):
            out.append(NOMINAL_ARM[["arm_yaw", "arm_shoulder", "arm_elbow"].index(name)])
        else:
            out.append(NOMINAL_LEG[["HAA", "HFE", "KFE"].index(name.split("_")[1])])
    return np.array(out)


def foot_targets(x_f: float, y_f: float, z: float = 0.0) -> dict:
    out = {}
    for leg in LEGS:
        sx, sy = leg_sign(leg)
        out[f"{leg}_foot"] = np.array([sx * x_f, sy * y_f, z])
    return out


def standing_state(model: RobotModel, height: float = 0.45, x_f: float = 0.3, y_f: float = 0.2,
                   ee_target=None, base_rpy=(0.0, 0.0, 0.0), seed: RobotState | None = None,
                   feet=None, tol: float = 1e-4, max_iter: int = 2000) -> RobotState:
    """Posture with the base at ``height`` and feet at (+-x_f, +-y_f, 0).

    ``feet`` restricts which feet are placed (others keep the seed angles).
    Raises IKError when the targets are out of reach.
    """
    from .model import quat_from_rpy
    if seed is None:
        seed = RobotState.from_parts(model, base_position=(0, 0, height),
                                     base_orientation=quat_from_rpy(base_rpy),
                                     joints=nominal_joints(model))
    targets = foot_targets(x_f, y_f)
    names = {c.name for c in model.contacts}
    if feet is not None:
        targets = {k: v for k, v in targets.items() if k in feet}
    targets = {k: v for k, v in targets.items() if k in names}
    if ee_target is not None:
        targets["arm_tip"] = np.asarray(ee_target, dtype=float)
    return ik_transpose(model, targets, seed, max_iter=max_iter, tol=tol)


__all__ = ["quadruped", "single_body", "fixture_suf", "standing_state", "nominal_joints",
           "foot_targets", "leg_sign", "LEGS", "IKError", "contact_positions"]
