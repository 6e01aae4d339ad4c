"""Rigid-body dynamics over assembled trees.

Inverse dynamics uses a recursive Newton-Euler sweep over the joint tree;
the joint-space mass matrix and bias terms are derived from the same routine
by probing (single source of truth). Torques follow

    tau = M(q) qdd + C(q, qd) qd + G(q) - J^T F_ext

with ``F_ext`` the wrench the environment applies to the end-effector,
expressed in the world frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import Body, forward_kinematics, jacobian, joint_transforms, sub_jacobian
from .rotations import exp_so3

GRAVITY = 9.81


@dataclass
class DynamicsState:
    """Joint-space state plus the external loading of one time step."""

    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    f_ext: np.ndarray = None    # 6-vector [force; moment], world frame, at EE
    payload: float = 0.0        # point mass rigidly attached at the EE frame


@dataclass
class TorqueProfile:
    """Per-step joint torques against per-joint limits."""

    tau: np.ndarray             # (steps, n_j)
    tau_max: np.ndarray         # (n_j,)

    def __post_init__(self):
        self.tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        self.tau_max = np.asarray(self.tau_max, dtype=float)
        if self.tau.shape[1] != self.tau_max.shape[0]:
            raise ValueError("torque profile width must match the joint count")


def _children_map(model):
    kids = {i: [] for i in range(-1, model.n_j)}
    for i, j in enumerate(model.joints):
        kids[j.parent].append(i)
    return kids


def rnea(model, q, qd, qdd, gravity=GRAVITY, payload=0.0, payload_joint=None):
    """Joint torques from a Newton-Euler sweep (no external wrench).

    ``payload`` adds a point mass at the EE frame, folded into the composite
    body that carries the end-effector.
    """
    q = model._check_q(q)
    qd = model._check_q(qd)
    qdd = model._check_q(qdd)
    n = model.n_j

    # body-frame kinematics sweep (root -> leaves)
    w = [np.zeros(3) for _ in range(n)]      # angular velocity, joint frame
    wd = [np.zeros(3) for _ in range(n)]
    a = [np.zeros(3) for _ in range(n)]      # linear acc of joint origin (incl. gravity trick)
    g_base = model.base_pose[:3, :3].T @ np.array([0.0, 0.0, gravity])

    for i, joint in enumerate(model.joints):
        R_pj = joint.T_parent[:3, :3] @ _axis_rot(joint.axis, q[i])
        # rotation parent->this (including joint motion); vectors map world<-frame
        p_pj = joint.T_parent[:3, 3]         # joint origin in parent frame
        if joint.parent < 0:
            w_par, wd_par, a_par = np.zeros(3), np.zeros(3), g_base
        else:
            w_par, wd_par, a_par = w[joint.parent], wd[joint.parent], a[joint.parent]
        RT = R_pj.T
        zi = joint.axis
        w[i] = RT @ w_par + zi * qd[i]
        wd[i] = RT @ wd_par + zi * qdd[i] + np.cross(RT @ w_par, zi * qd[i])
        a[i] = RT @ (a_par + np.cross(wd_par, p_pj) + np.cross(w_par, np.cross(w_par, p_pj)))

    # force/torque sweep (leaves -> root)
    f = [np.zeros(3) for _ in range(n)]
    nmom = [np.zeros(3) for _ in range(n)]
    for i in range(n):
        body = model.bodies.get(i)
        mass, com, inertia = (body.mass, body.com, body.inertia) if body else (0.0, np.zeros(3), np.zeros((3, 3)))
        if payload > 0.0 and i == (payload_joint if payload_joint is not None else model.ee_joint):
            comp = Body(mass, com.copy(), inertia.copy())
            comp.add(payload, model.ee_T_local[:3, 3], np.zeros((3, 3)))
            mass, com, inertia = comp.mass, comp.com, comp.inertia
        a_com = a[i] + np.cross(wd[i], com) + np.cross(w[i], np.cross(w[i], com))
        f[i] = mass * a_com
        nmom[i] = inertia @ wd[i] + np.cross(w[i], inertia @ w[i]) + np.cross(com, f[i])

    kids = _children_map(model)
    tau = np.zeros(n)
    for i in reversed(range(n)):
        joint = model.joints[i]
        for c in kids[i]:
            Rc = model.joints[c].T_parent[:3, :3] @ _axis_rot(model.joints[c].axis, q[c])
            pc = model.joints[c].T_parent[:3, 3]
            f_c = Rc @ f[c]
            f[i] = f[i] + f_c
            nmom[i] = nmom[i] + Rc @ nmom[c] + np.cross(pc, f_c)
        tau[i] = joint.axis @ nmom[i]
    return tau


def _axis_rot(axis, angle):
    return exp_so3(np.asarray(axis) * angle)


def inverse_dynamics(model, state: DynamicsState):
    """Required joint torques for one step, external wrench included."""
    tau = rnea(model, state.q, state.qd, state.qdd, payload=state.payload)
    if state.f_ext is not None and np.any(state.f_ext):
        J = jacobian(model, state.q)
        tau = tau - J.T @ np.asarray(state.f_ext, dtype=float)
    return tau


def mass_matrix(model, q, payload=0.0):
    """Symmetric positive-definite joint-space inertia via unit-qdd probes."""
    n = model.n_j
    M = np.zeros((n, n))
    zero = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        M[:, j] = rnea(model, q, zero, e, gravity=0.0, payload=payload)
    return 0.5 * (M + M.T)


def bias_terms(model, q, qd, payload=0.0):
    """(C(q,qd) qd, G(q)) as separate vectors."""
    zero = np.zeros(model.n_j)
    G = rnea(model, q, zero, zero, payload=payload)
    Cqd = rnea(model, q, qd, zero, gravity=0.0, payload=payload)
    return Cqd, G


def gravity_vector(model, q, payload=0.0):
    zero = np.zeros(model.n_j)
    return rnea(model, q, zero, zero, payload=payload)


def potential_energy(model, q, gravity=GRAVITY, payload=0.0):
    joint_T = joint_transforms(model, q)
    pe = 0.0
    for i, body in model.bodies.items():
        if body.mass <= 0.0:
            continue
        T = model.base_pose if i < 0 else joint_T[i]
        com_w = T[:3, :3] @ body.com + T[:3, 3]
        pe += body.mass * gravity * com_w[2]
    if payload > 0.0:
        ee = forward_kinematics(model, q, joint_T)
        pe += payload * gravity * ee.p[2]
    return pe


def kinetic_energy(model, q, qd, payload=0.0):
    M = mass_matrix(model, q, payload=payload)
    return 0.5 * qd @ M @ qd


def torque_feasible(profile: TorqueProfile):
    """Check |tau| <= tau_max everywhere.

    Returns (flag, per-joint max |tau|, list of violating (step, joint)).
    """
    abs_tau = np.abs(profile.tau)
    peak = abs_tau.max(axis=0) if abs_tau.size else np.zeros_like(profile.tau_max)
    bad = np.argwhere(abs_tau > profile.tau_max[None, :])
    ok = bad.shape[0] == 0
    return ok, peak, [tuple(map(int, row)) for row in bad]


def effort_metric(profile: TorqueProfile):
    """Mean over steps of the summed squared joint torques."""
    if profile.tau.shape[0] == 0:
        raise ValueError("effort metric needs at least one step")
    return float(np.mean(np.sum(profile.tau ** 2, axis=1)))


def manipulability_metric(model, trajectory_q, axes):
    """Mean det(J_sub J_sub^T) over a joint trajectory.

    ``axes`` selects the task rows; only main-branch columns enter so assist
    joints of bi-branch designs do not inflate the measure.
    """
    trajectory_q = np.atleast_2d(np.asarray(trajectory_q, dtype=float))
    if trajectory_q.shape[0] == 0:
        raise ValueError("manipulability metric needs a nonempty trajectory")
    vals = []
    cols = model.main_joints
    for q in trajectory_q:
        J = jacobian(model, q)
        Js = sub_jacobian(J, axes)[:, cols]
        # Gram determinant on the smaller side; for the regular case
        # (task rows <= main-branch DoFs) this is det(J_sub J_sub^T)
        gram = Js @ Js.T if Js.shape[0] <= Js.shape[1] else Js.T @ Js
        vals.append(np.linalg.det(gram))
    return float(np.mean(vals))
