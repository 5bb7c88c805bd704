"""Branched rigid-body model with point contacts.

Generalised coordinates of a floating-base model are laid out as

    q    = [base position (3), base quaternion w, x, y, z (4), joint angles]
    qdot = [base origin velocity (3), base angular velocity (3), joint rates]

with both base velocities expressed in the world frame.  Fixed-base
models drop the base block; their root link sits at the world origin.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import jsonschema
import numpy as np

CONTACT_KINDS = ("foot", "prong", "end_effector")
QUAT_TOL = 1e-9


class ModelError(ValueError):
    """Raised for malformed models or states that do not match a model."""


class IKError(RuntimeError):
    """Transpose-Jacobian IK stopped before reaching the tolerance."""

    def __init__(self, message: str, residual: float, state: "RobotState", iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} m after {iterations} iterations)")
        self.residual = residual
        self.state = state
        self.iterations = iterations


# --------------------------------------------------------------------------
# small rotation helpers


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_matrix(axis, angle: float):
    """Rodrigues' formula; ``axis`` must be a unit vector."""
    K = skew(axis)
    s, c = np.sin(angle), np.cos(angle)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def rpy_matrix(rpy):
    r, p, y = rpy
    return axis_angle_matrix((0, 0, 1.0), y) @ axis_angle_matrix((0, 1.0, 0), p) \
        @ axis_angle_matrix((1.0, 0, 0), r)


def quat_to_matrix(quat):
    w, x, y, z = quat
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.array([1.0, *(0.5 * v)]) / np.sqrt(1.0 + 0.25 * angle ** 2)
    axis = v / angle
    return np.array([np.cos(angle / 2), *(np.sin(angle / 2) * axis)])


def quat_from_rpy(rpy):
    r, p, y = rpy
    q = quat_multiply(quat_from_rotvec((0, 0, y)), quat_from_rotvec((0, p, 0)))
    return quat_multiply(q, quat_from_rotvec((r, 0, 0)))


# --------------------------------------------------------------------------
# model description


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    mass: float
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "com", np.asarray(self.com, dtype=float).reshape(3))
        I = np.asarray(self.inertia, dtype=float)
        if I.shape == (3,):
            I = np.diag(I)
        object.__setattr__(self, "inertia", I.reshape(3, 3))


@dataclass(frozen=True, eq=False)
class Joint:
    """Revolute joint; the child frame is ``origin * Rot(axis, angle)``."""

    name: str
    parent: str
    child: str
    axis: np.ndarray
    origin_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    origin_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lower: float = -np.pi
    upper: float = np.pi
    torque_limit: float = 0.0

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ModelError(f"joint {self.name}: zero axis")
        object.__setattr__(self, "axis", axis / norm)
        object.__setattr__(self, "origin_xyz", np.asarray(self.origin_xyz, dtype=float).reshape(3))
        object.__setattr__(self, "origin_rpy", np.asarray(self.origin_rpy, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class ContactPoint:
    name: str
    kind: str
    link: str
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.kind not in CONTACT_KINDS:
            raise ModelError(f"contact {self.name}: unknown kind {self.kind!r}")
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class RobotModel:
    links: tuple
    joints: tuple
    contacts: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    friction_mu: float = 0.6
    floating_base: bool = True

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "contacts", tuple(self.contacts))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float).reshape(3))
        self._validate_and_index()

    # -- construction-time checks and caches
    def _validate_and_index(self):
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise ModelError("duplicate link names")
        link_index = {n: i for i, n in enumerate(names)}
        for link in self.links:
            if not link.mass > 0:
                raise ModelError(f"link {link.name}: mass must be positive")
        if not self.friction_mu >= 0:
            raise ModelError("friction coefficient must be nonnegative")

        children = {}
        for joint in self.joints:
            if joint.parent not in link_index or joint.child not in link_index:
                raise ModelError(f"joint {joint.name}: unknown link")
            if joint.child in children:
                raise ModelError(f"link {joint.child} has two parent joints")
            if joint.torque_limit < 0:
                raise ModelError(f"joint {joint.name}: negative torque limit")
            if joint.lower > joint.upper:
                raise ModelError(f"joint {joint.name}: empty position range")
            children[joint.child] = joint
        roots = [n for n in names if n not in children]
        if len(roots) != 1:
            raise ModelError(f"kinematic tree needs exactly one root, found {roots}")

        # stable topological order (declaration order when already valid);
        # joints never reached hang off a cycle
        placed, order, pending = {roots[0]}, [], list(self.joints)
        while pending:
            ready = [j for j in pending if j.parent in placed]
            if not ready:
                raise ModelError("kinematic tree contains a cycle")
            first = ready[0]
            order.append(first)
            placed.add(first.child)
            pending.remove(first)
        object.__setattr__(self, "joints", tuple(order))

        joint_of_link = {j.child: k for k, j in enumerate(order)}
        support = {roots[0]: ()}
        for k, joint in enumerate(order):
            support[joint.child] = support[joint.parent] + (k,)

        cnames = [c.name for c in self.contacts]
        if len(set(cnames)) != len(cnames):
            raise ModelError("duplicate contact names")
        for contact in self.contacts:
            if contact.link not in link_index:
                raise ModelError(f"contact {contact.name}: unknown link {contact.link}")
            if contact.kind == "prong" and contact.link != roots[0]:
                raise ModelError(f"prong {contact.name} must be attached to the base link")

        object.__setattr__(self, "_root", roots[0])
        object.__setattr__(self, "_link_index", link_index)
        object.__setattr__(self, "_joint_of_link", joint_of_link)
        object.__setattr__(self, "_support", support)
        object.__setattr__(self, "_contact_index", {n: i for i, n in enumerate(cnames)})
        object.__setattr__(self, "_origin_R", [rpy_matrix(j.origin_rpy) for j in order])

    # -- sizes and lookups
    @property
    def root(self) -> str:
        return self._root

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def base_dof(self) -> int:
        return 6 if self.floating_base else 0

    @property
    def nq(self) -> int:
        return self.n_joints + (7 if self.floating_base else 0)

    @property
    def nv(self) -> int:
        return self.n_joints + self.base_dof

    @property
    def joint_names(self) -> list:
        return [j.name for j in self.joints]

    @property
    def torque_limits(self) -> np.ndarray:
        return np.array([j.torque_limit for j in self.joints])

    @property
    def joint_limits(self) -> tuple:
        return (np.array([j.lower for j in self.joints]),
                np.array([j.upper for j in self.joints]))

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    def contact(self, name: str) -> ContactPoint:
        try:
            return self.contacts[self._contact_index[name]]
        except KeyError:
            raise ModelError(f"unknown contact {name!r}") from None

    def contacts_of_kind(self, kind: str) -> list:
        return [c.name for c in self.contacts if c.kind == kind]

    def selection_matrix(self) -> np.ndarray:
        """Maps joint torques into generalised forces."""
        B = np.zeros((self.nv, self.n_joints))
        B[self.base_dof:, :] = np.eye(self.n_joints)
        return B

    # -- derived models
    def with_contacts(self, contacts) -> "RobotModel":
        return replace(self, contacts=tuple(contacts))

    def with_contact_offset(self, name: str, offset) -> "RobotModel":
        contacts = [replace(c, offset=np.asarray(offset, float)) if c.name == name else c
                    for c in self.contacts]
        return self.with_contacts(contacts)

    def without_contacts(self, names) -> "RobotModel":
        names = set(names)
        return self.with_contacts([c for c in self.contacts if c.name not in names])

    def scaled(self, torque_scale: float = 1.0, gravity_scale: float = 1.0) -> "RobotModel":
        joints = [replace(j, torque_limit=j.torque_limit * torque_scale) for j in self.joints]
        return replace(self, joints=tuple(joints), gravity=self.gravity * gravity_scale)

    # -- serialisation
    def to_dict(self) -> dict:
        return {
            "links": [{"name": l.name, "mass": l.mass, "com": l.com.tolist(),
                       "inertia": l.inertia.tolist()} for l in self.links],
            "joints": [{"name": j.name, "parent": j.parent, "child": j.child,
                        "axis": j.axis.tolist(), "origin_xyz": j.origin_xyz.tolist(),
                        "origin_rpy": j.origin_rpy.tolist(), "limits": [j.lower, j.upper],
                        "torque_limit": j.torque_limit} for j in self.joints],
            "contacts": [{"name": c.name, "kind": c.kind, "link": c.link,
                          "offset": c.offset.tolist()} for c in self.contacts],
            "gravity": self.gravity.tolist(),
            "friction_mu": self.friction_mu,
            "floating_base": self.floating_base,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RobotModel":
        try:
            jsonschema.validate(doc, model_schema())
        except jsonschema.ValidationError as exc:
            raise ModelError(f"invalid model document: {exc.message}") from exc
        links = [Link(d["name"], d["mass"], d.get("com", [0, 0, 0]),
                      d.get("inertia", np.zeros((3, 3)))) for d in doc["links"]]
        joints = [Joint(d["name"], d["parent"], d["child"], d["axis"],
                        d.get("origin_xyz", [0, 0, 0]), d.get("origin_rpy", [0, 0, 0]),
                        d["limits"][0], d["limits"][1], d["torque_limit"])
                  for d in doc["joints"]]
        contacts = [ContactPoint(d["name"], d["kind"], d["link"], d.get("offset", [0, 0, 0]))
                    for d in doc["contacts"]]
        return cls(links, joints, contacts, doc["gravity"], doc["friction_mu"],
                   doc.get("floating_base", True))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RobotModel":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RobotModel":
        with open(path) as fh:
            return cls.from_json(fh.read())


def model_schema() -> dict:
    text = resources.files("prongsuf").joinpath("data/robot_model.schema.json").read_text()
    return json.loads(text)


# --------------------------------------------------------------------------
# state


@dataclass(frozen=True, eq=False)
class RobotState:
    q: np.ndarray
    qdot: np.ndarray
    qddot_d: np.ndarray

    def __post_init__(self):
        for name in ("q", "qdot", "qddot_d"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.qdot.size != self.qddot_d.size:
            raise ModelError("qdot and qddot_d differ in size")
        floating = self.q.size == self.qdot.size + 1
        if not floating and self.q.size != self.qdot.size:
            raise ModelError("q and qdot sizes are incompatible")
        if floating and abs(np.linalg.norm(self.q[3:7]) - 1.0) > QUAT_TOL:
            raise ModelError("base quaternion is not unit norm")

    @classmethod
    def zero(cls, model: RobotModel) -> "RobotState":
        return cls.from_parts(model)

    @classmethod
    def from_parts(cls, model: RobotModel, base_position=(0, 0, 0), base_orientation=(1, 0, 0, 0),
                   joints=None, qdot=None, qddot_d=None) -> "RobotState":
        joints = np.zeros(model.n_joints) if joints is None else np.asarray(joints, float)
        if model.floating_base:
            quat = np.asarray(base_orientation, float)
            q = np.concatenate([np.asarray(base_position, float), quat / np.linalg.norm(quat), joints])
        else:
            q = joints
        qdot = np.zeros(model.nv) if qdot is None else qdot
        qddot_d = np.zeros(model.nv) if qddot_d is None else qddot_d
        return cls(q, qdot, qddot_d)

    @property
    def floating(self) -> bool:
        return self.q.size == self.qdot.size + 1

    @property
    def joints(self) -> np.ndarray:
        return self.q[7:] if self.floating else self.q

    @property
    def base_position(self) -> np.ndarray:
        return self.q[:3] if self.floating else np.zeros(3)

    @property
    def base_rotation(self) -> np.ndarray:
        return quat_to_matrix(self.q[3:7]) if self.floating else np.eye(3)

    def with_joints(self, joints) -> "RobotState":
        q = self.q.copy()
        q[q.size - len(joints):] = joints
        return replace(self, q=q)

    def to_dict(self) -> dict:
        return {"q": self.q.tolist(), "qdot": self.qdot.tolist(), "qddot_d": self.qddot_d.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "RobotState":
        qdot = doc.get("qdot")
        n_v = len(qdot) if qdot is not None else None
        if qdot is None:
            # floating base assumed when q carries a quaternion slot
            n_v = len(doc["q"]) - 1
            qdot = np.zeros(n_v)
        qddot = doc.get("qddot_d", np.zeros(n_v))
        return cls(np.array(doc["q"]), np.array(qdot), np.array(qddot))


def check_state(model: RobotModel, state: RobotState):
    if state.q.size != model.nq or state.qdot.size != model.nv:
        raise ModelError(f"state has nq={state.q.size}, nv={state.qdot.size}; "
                         f"model needs nq={model.nq}, nv={model.nv}")


def integrate(model: RobotModel, state: RobotState, v, dt: float = 1.0) -> RobotState:
    """Move ``q`` along generalised velocity ``v`` for ``dt``.

    The base rotation is updated on the left, matching world-frame
    angular velocity.
    """
    v = np.asarray(v, dtype=float)
    q = state.q.copy()
    if model.floating_base:
        q[:3] += dt * v[:3]
        quat = quat_multiply(quat_from_rotvec(dt * v[3:6]), q[3:7])
        q[3:7] = quat / np.linalg.norm(quat)
        q[7:] += dt * v[6:]
    else:
        q += dt * v
    return replace(state, q=q)


# --------------------------------------------------------------------------
# kinematics


@dataclass
class _Kinematics:
    R: list      # world rotation per link
    p: list      # world position of each link origin
    axes: np.ndarray     # world joint axes, (n_joints, 3)
    origins: np.ndarray  # world joint positions, (n_joints, 3)


def _kinematics(model: RobotModel, state: RobotState) -> _Kinematics:
    check_state(model, state)
    n_links = len(model.links)
    R = [None] * n_links
    p = [None] * n_links
    root = model._link_index[model.root]
    R[root] = state.base_rotation
    p[root] = state.base_position.copy()
    axes = np.zeros((model.n_joints, 3))
    origins = np.zeros((model.n_joints, 3))
    angles = state.joints
    for k, joint in enumerate(model.joints):
        ip = model._link_index[joint.parent]
        ic = model._link_index[joint.child]
        Rj = R[ip] @ model._origin_R[k]
        origins[k] = p[ip] + R[ip] @ joint.origin_xyz
        axes[k] = Rj @ joint.axis
        R[ic] = Rj @ axis_angle_matrix(joint.axis, angles[k])
        p[ic] = origins[k]
    return _Kinematics(R, p, axes, origins)


def _homogeneous(R, p):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = p
    return T


def forward_kinematics(model: RobotModel, state: RobotState) -> dict:
    """World transforms (4x4) of every link and contact point, keyed by name."""
    kin = _kinematics(model, state)
    frames = {}
    for i, link in enumerate(model.links):
        frames[link.name] = _homogeneous(kin.R[i], kin.p[i])
    for contact in model.contacts:
        i = model._link_index[contact.link]
        frames[contact.name] = _homogeneous(kin.R[i], kin.p[i] + kin.R[i] @ contact.offset)
    return frames


def _point_world(model, kin, link: str, offset):
    i = model._link_index[link]
    return kin.p[i] + kin.R[i] @ offset


def _linear_jacobian(model, kin, link: str, point) -> np.ndarray:
    J = np.zeros((3, model.nv))
    nb = model.base_dof
    if nb:
        base = kin.p[model._link_index[model.root]]
        J[:, :3] = np.eye(3)
        J[:, 3:6] = -skew(point - base)
    for k in model._support[link]:
        J[:, nb + k] = np.cross(kin.axes[k], point - kin.origins[k])
    return J


def _angular_jacobian(model, kin, link: str) -> np.ndarray:
    J = np.zeros((3, model.nv))
    nb = model.base_dof
    if nb:
        J[:, 3:6] = np.eye(3)
    for k in model._support[link]:
        J[:, nb + k] = kin.axes[k]
    return J


def contact_position(model: RobotModel, state: RobotState, name: str) -> np.ndarray:
    c = model.contact(name)
    return _point_world(model, _kinematics(model, state), c.link, c.offset)


def contact_positions(model: RobotModel, state: RobotState, names) -> dict:
    kin = _kinematics(model, state)
    out = {}
    for name in names:
        c = model.contact(name)
        out[name] = _point_world(model, kin, c.link, c.offset)
    return out


def point_jacobian(model: RobotModel, state: RobotState, contact: str) -> np.ndarray:
    """3 x nv map from generalised velocity to the contact's world velocity."""
    c = model.contact(contact)
    kin = _kinematics(model, state)
    return _linear_jacobian(model, kin, c.link, _point_world(model, kin, c.link, c.offset))


def contact_jacobians(model: RobotModel, state: RobotState, names) -> np.ndarray:
    """Stacked (3 len(names)) x nv Jacobian of several contacts."""
    kin = _kinematics(model, state)
    blocks = []
    for name in names:
        c = model.contact(name)
        blocks.append(_linear_jacobian(model, kin, c.link, _point_world(model, kin, c.link, c.offset)))
    return np.vstack(blocks) if blocks else np.zeros((0, model.nv))


# --------------------------------------------------------------------------
# dynamics


def _velocity_pass(model, kin, state):
    """Link angular velocities plus bias (zero-qddot) accelerations.

    Returns per-link (omega, alpha, v_origin, a_origin) in world frame.
    """
    n_links = len(model.links)
    omega = [None] * n_links
    alpha = [None] * n_links
    v = [None] * n_links
    a = [None] * n_links
    root = model._link_index[model.root]
    if model.floating_base:
        v[root] = state.qdot[:3].copy()
        omega[root] = state.qdot[3:6].copy()
    else:
        v[root] = np.zeros(3)
        omega[root] = np.zeros(3)
    alpha[root] = np.zeros(3)
    a[root] = np.zeros(3)
    rates = state.qdot[model.base_dof:]
    for k, joint in enumerate(model.joints):
        ip = model._link_index[joint.parent]
        ic = model._link_index[joint.child]
        r = kin.p[ic] - kin.p[ip]
        wp = omega[ip]
        v[ic] = v[ip] + np.cross(wp, r)
        a[ic] = a[ip] + np.cross(alpha[ip], r) + np.cross(wp, np.cross(wp, r))
        spin = kin.axes[k] * rates[k]
        omega[ic] = wp + spin
        alpha[ic] = alpha[ip] + np.cross(wp, spin)
    return omega, alpha, v, a


def mass_matrix(model: RobotModel, state: RobotState) -> np.ndarray:
    kin = _kinematics(model, state)
    M = np.zeros((model.nv, model.nv))
    for i, link in enumerate(model.links):
        com = kin.p[i] + kin.R[i] @ link.com
        Jv = _linear_jacobian(model, kin, link.name, com)
        Jw = _angular_jacobian(model, kin, link.name)
        Iw = kin.R[i] @ link.inertia @ kin.R[i].T
        M += link.mass * Jv.T @ Jv + Jw.T @ Iw @ Jw
    return M


def dynamics_bias(model: RobotModel, state: RobotState) -> np.ndarray:
    """Generalised bias force h(q, qdot): Coriolis, centrifugal and gravity.

    ``M qddot + h`` equals the generalised applied force, so at rest under
    gravity ``h`` is the gradient of the potential energy.
    """
    kin = _kinematics(model, state)
    omega, alpha, _, a = _velocity_pass(model, kin, state)
    h = np.zeros(model.nv)
    for i, link in enumerate(model.links):
        r = kin.R[i] @ link.com
        com = kin.p[i] + r
        a_com = a[i] + np.cross(alpha[i], r) + np.cross(omega[i], np.cross(omega[i], r))
        Jv = _linear_jacobian(model, kin, link.name, com)
        h += Jv.T @ (link.mass * (a_com - model.gravity))
        if np.any(link.inertia):
            Jw = _angular_jacobian(model, kin, link.name)
            Iw = kin.R[i] @ link.inertia @ kin.R[i].T
            h += Jw.T @ (Iw @ alpha[i] + np.cross(omega[i], Iw @ omega[i]))
    return h


def contact_bias_acceleration(model: RobotModel, state: RobotState, names) -> np.ndarray:
    """Stacked Jdot @ qdot of the named contact points."""
    kin = _kinematics(model, state)
    omega, alpha, _, a = _velocity_pass(model, kin, state)
    out = []
    for name in names:
        c = model.contact(name)
        i = model._link_index[c.link]
        r = kin.R[i] @ c.offset
        out.append(a[i] + np.cross(alpha[i], r) + np.cross(omega[i], np.cross(omega[i], r)))
    return np.concatenate(out) if out else np.zeros(0)


def potential_energy(model: RobotModel, state: RobotState) -> float:
    kin = _kinematics(model, state)
    U = 0.0
    for i, link in enumerate(model.links):
        com = kin.p[i] + kin.R[i] @ link.com
        U -= link.mass * float(model.gravity @ com)
    return U


def center_of_mass(model: RobotModel, state: RobotState) -> np.ndarray:
    kin = _kinematics(model, state)
    total = np.zeros(3)
    for i, link in enumerate(model.links):
        total += link.mass * (kin.p[i] + kin.R[i] @ link.com)
    return total / model.total_mass


# --------------------------------------------------------------------------
# inverse kinematics


def ik_transpose(model: RobotModel, targets: dict, seed: RobotState, max_iter: int = 500,
                 tol: float = 1e-4, move_base: bool = False) -> RobotState:
    """Move contact points onto world targets with transpose-Jacobian steps.

    Each update is ``dq = alpha J^T e`` with ``alpha`` the exact minimiser of
    the linearised error along that direction; the step is halved until the
    true error does not increase, so the error norm is monotone.  Joint
    angles are clipped to their limits.  The base is held fixed unless
    ``move_base`` is set.

    Raises IKError carrying the best state and residual when ``tol`` is not
    reached within ``max_iter`` iterations or progress stalls.
    """
    names = list(targets)
    goal = np.concatenate([np.asarray(targets[n], dtype=float) for n in names])
    lower, upper = model.joint_limits
    nb = model.base_dof
    cols = slice(0, model.nv) if move_base else slice(nb, model.nv)

    def error(state):
        pos = contact_positions(model, state, names)
        return goal - np.concatenate([pos[n] for n in names])

    def step(state, dq):
        v = np.zeros(model.nv)
        v[cols] = dq
        new = integrate(model, state, v)
        return new.with_joints(np.clip(new.joints, lower, upper))

    state = seed
    e = error(state)
    err = float(np.linalg.norm(e))
    it = 0
    while err > tol and it < max_iter:
        it += 1
        J = contact_jacobians(model, state, names)[:, cols]
        g = J.T @ e
        Jg = J @ g
        denom = float(Jg @ Jg)
        if denom <= 1e-300:
            raise IKError("transpose-Jacobian direction vanished", err, state, it)
        alpha = float(e @ Jg) / denom
        for _ in range(40):
            trial = step(state, alpha * g)
            e_trial = error(trial)
            err_trial = float(np.linalg.norm(e_trial))
            if err_trial <= err:
                break
            alpha *= 0.5
        else:
            raise IKError("no error-decreasing step", err, state, it)
        if err - err_trial < 1e-14 * max(err, 1.0):
            state, e, err = trial, e_trial, err_trial
            break
        state, e, err = trial, e_trial, err_trial
    if err > tol:
        raise IKError("IK did not converge", err, state, it)
    return state
