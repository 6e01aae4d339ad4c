"""Forward and differential kinematics for assembled tree models.

A model is a tree of revolute joints. Each joint owns a composite rigid body
(everything rigidly attached distally up to the next joint) and carries the
fixed transform from its parent joint frame. Module geometry needed for
collision checking is kept as per-module frames referenced to the supporting
joint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import exp_so3, hat, quat_from_matrix, transform

AXIS_NAMES = ("px", "py", "pz", "ox", "oy", "oz")
AXIS_INDEX = {name: i for i, name in enumerate(AXIS_NAMES)}


def axes_to_indices(axes):
    """Normalize an axis set (names or indices) to sorted row indices."""
    if not len(axes):
        raise ValueError("axis set must be nonempty")
    idx = []
    for a in axes:
        if isinstance(a, str):
            idx.append(AXIS_INDEX[a])
        else:
            idx.append(int(a))
    out = sorted(set(idx))
    if out and (out[0] < 0 or out[-1] > 5):
        raise ValueError(f"axis indices out of range: {axes}")
    return out


@dataclass
class Joint:
    parent: int                 # parent joint index, -1 = base
    T_parent: np.ndarray        # parent joint frame -> this joint frame at q=0
    axis: np.ndarray            # unit rotation axis in joint frame
    module_id: int
    branch: str                 # 'shared' | 'main' | 'assist'
    torque_limit: float
    q_bound: tuple = (-2.4, 2.4)
    qd_bound: tuple = (-2.0, 2.0)
    qdd_bound: tuple = (-0.5, 0.5)


@dataclass
class Body:
    """Composite rigid body expressed in its owner joint frame."""

    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def add(self, mass, com, inertia):
        """Fuse another body (same frame) into this composite."""
        if mass <= 0.0:
            return
        total = self.mass + mass
        new_com = (self.mass * self.com + mass * com) / total
        self.inertia = (self.inertia + self._shift(self.mass, self.com - new_com)
                        + inertia + self._shift(mass, com - new_com))
        self.mass = total
        self.com = new_com

    @staticmethod
    def _shift(mass, d):
        # parallel-axis contribution for a CoM offset d
        return mass * ((d @ d) * np.eye(3) - np.outer(d, d))


@dataclass
class ModuleFrame:
    joint: int                  # supporting joint index (-1 = base)
    T_local: np.ndarray         # joint frame -> module input flange
    module_id: int
    kind: str
    length: float
    radius: float


@dataclass
class EEPose:
    """World pose of the main-branch end-effector."""

    p: np.ndarray
    R: np.ndarray

    @property
    def quaternion(self):
        return quat_from_matrix(self.R)

    def as_transform(self):
        return transform(self.R, self.p)


class KinematicModel:
    """Assembled kinematic/dynamic tree, immutable after construction."""

    def __init__(self, base_pose, joints, bodies, module_frames, ee_joint,
                 ee_T_local, main_joints, assist_joints, adjacent_pairs,
                 segmented=None):
        self.base_pose = base_pose
        self.joints = joints
        self.bodies = bodies
        self.module_frames = module_frames
        self.ee_joint = ee_joint
        self.ee_T_local = ee_T_local
        self.main_joints = main_joints        # EE support path, root -> tip
        self.assist_joints = assist_joints
        self.adjacent_pairs = adjacent_pairs  # module-frame index pairs
        self.segmented = segmented
        for j in joints:
            if j.parent >= len(joints):
                raise ValueError("joint parent index out of range")

    @property
    def n_j(self):
        return len(self.joints)

    @property
    def d_m(self):
        """DoF count on the end-effector support path (shared + main)."""
        return len(self.main_joints)

    @property
    def d_a(self):
        return len(self.assist_joints)

    def q_lower(self):
        return np.array([j.q_bound[0] for j in self.joints])

    def q_upper(self):
        return np.array([j.q_bound[1] for j in self.joints])

    def qd_limit(self):
        return np.array([j.qd_bound[1] for j in self.joints])

    def qdd_limit(self):
        return np.array([j.qdd_bound[1] for j in self.joints])

    def torque_limits(self):
        return np.array([j.torque_limit for j in self.joints])

    def reach(self):
        """Sum of module lengths along the EE support path (coarse bound)."""
        path = set(self.main_joints) | {-1}
        total = 0.0
        for fr in self.module_frames:
            if fr.joint in path:
                total += fr.length
        return total

    def structure_signature(self):
        """Hashable structural identity used for design deduplication."""
        sig = []
        for j in self.joints:
            sig.append(("J", j.parent, j.branch, j.module_id >= 0,
                        tuple(np.round(j.axis, 9)),
                        tuple(np.round(j.T_parent.ravel(), 9)),
                        round(j.torque_limit, 9)))
        for fr in self.module_frames:
            sig.append(("F", fr.joint, fr.kind, round(fr.length, 9),
                        round(fr.radius, 9), tuple(np.round(fr.T_local.ravel(), 9))))
        sig.append(("B", tuple(np.round(self.base_pose.ravel(), 9))))
        return tuple(sig)

    def _check_q(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.n_j,):
            raise ValueError(f"expected {self.n_j} joint values, got shape {q.shape}")
        return q


def joint_transforms(model, q):
    """World transform of every joint frame (after its own rotation)."""
    q = model._check_q(q)
    out = []
    for i, joint in enumerate(model.joints):
        T_par = model.base_pose if joint.parent < 0 else out[joint.parent]
        T = T_par @ joint.T_parent
        T = T @ transform(exp_so3(joint.axis * q[i]))
        out.append(T)
    return out


def module_poses(model, q, joint_T=None):
    """World transform of every module input flange (for collision)."""
    if joint_T is None:
        joint_T = joint_transforms(model, q)
    out = []
    for fr in model.module_frames:
        T_sup = model.base_pose if fr.joint < 0 else joint_T[fr.joint]
        out.append(T_sup @ fr.T_local)
    return out


def forward_kinematics(model, q, joint_T=None):
    """World pose of the main-branch end-effector."""
    if joint_T is None:
        joint_T = joint_transforms(model, q)
    T_sup = model.base_pose if model.ee_joint < 0 else joint_T[model.ee_joint]
    T = T_sup @ model.ee_T_local
    return EEPose(T[:3, 3].copy(), T[:3, :3].copy())


def jacobian(model, q, joint_T=None):
    """Geometric Jacobian of the EE in the world frame, 6 x n_j.

    Columns of assist-branch joints are exactly zero: they do not move the
    main-branch end-effector.
    """
    q = model._check_q(q)
    if joint_T is None:
        joint_T = joint_transforms(model, q)
    ee = forward_kinematics(model, q, joint_T)
    J = np.zeros((6, model.n_j))
    for i in model.main_joints:
        T = joint_T[i]
        z = T[:3, :3] @ model.joints[i].axis
        r = ee.p - T[:3, 3]
        J[:3, i] = np.cross(z, r)
        J[3:, i] = z
    return J


def _velocity_pass(model, q, qd, joint_T):
    """World angular velocity and origin linear velocity of each joint frame."""
    omega = [None] * model.n_j
    vel = [None] * model.n_j
    for i, joint in enumerate(model.joints):
        if joint.parent < 0:
            w_par = np.zeros(3)
            v_par = np.zeros(3)
            p_par = model.base_pose[:3, 3]
        else:
            w_par = omega[joint.parent]
            v_par = vel[joint.parent]
            p_par = joint_T[joint.parent][:3, 3]
        p_i = joint_T[i][:3, 3]
        z_i = joint_T[i][:3, :3] @ joint.axis
        vel[i] = v_par + np.cross(w_par, p_i - p_par)
        omega[i] = w_par + z_i * qd[i]
    return omega, vel


def jacobian_dot(model, q, qd, joint_T=None):
    """Time derivative of the geometric Jacobian along (q, qd)."""
    q = model._check_q(q)
    qd = model._check_q(qd)
    if joint_T is None:
        joint_T = joint_transforms(model, q)
    omega, vel = _velocity_pass(model, q, qd, joint_T)
    ee = forward_kinematics(model, q, joint_T)
    J = jacobian(model, q, joint_T)
    v_e = J[:3] @ qd
    Jd = np.zeros((6, model.n_j))
    for i in model.main_joints:
        T = joint_T[i]
        z = T[:3, :3] @ model.joints[i].axis
        zd = np.cross(omega[i], z)
        r = ee.p - T[:3, 3]
        rd = v_e - vel[i]
        Jd[:3, i] = np.cross(zd, r) + np.cross(z, rd)
        Jd[3:, i] = zd
    return Jd


def sub_jacobian(J, axes):
    """Row selection of J for the listed task axes."""
    idx = axes_to_indices(axes)
    return J[idx, :]
