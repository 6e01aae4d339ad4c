"""Rotation utilities: SO(3) exp/log maps, scalar-first quaternions, transforms.

Quaternions are ``[eta, ex, ey, ez]`` (scalar first, unit norm). Rotation
matrices map body vectors to world vectors. Homogeneous transforms are 4x4.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def hat(v):
    """Skew-symmetric matrix such that hat(v) @ u == cross(v, u)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def exp_so3(phi):
    """Rotation matrix for a rotation vector via Rodrigues' formula."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    if theta < 1e-10:
        # second-order Taylor keeps orthonormality to machine precision here
        K = hat(phi)
        return np.eye(3) + K + 0.5 * (K @ K)
    axis = phi / theta
    K = hat(axis)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def log_so3(R):
    """Rotation vector of a rotation matrix; robust near 0 and pi."""
    tr = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(tr)
    if theta < 1e-10:
        return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta > np.pi - 1e-6:
        # near pi the off-diagonal formula degenerates; take the axis from
        # the dominant column of R + I
        A = R + np.eye(3)
        col = int(np.argmax(np.linalg.norm(A, axis=0)))
        axis = A[:, col] / np.linalg.norm(A[:, col])
        # fix the sign using the skew part (vanishes exactly at pi)
        w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        if w @ axis < 0.0:
            axis = -axis
        return theta * axis
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return theta / (2.0 * np.sin(theta)) * w


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1.0, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def rpy_to_matrix(rpy):
    """Roll-pitch-yaw (x-y-z extrinsic, i.e. Rz @ Ry @ Rx) to matrix."""
    r, p, y = rpy
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def quat_from_matrix(R):
    """Scalar-first unit quaternion from a rotation matrix (eta >= 0)."""
    tr = np.trace(R)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_matrix(q):
    eta, ex, ey, ez = q
    return np.array([
        [1 - 2 * (ey * ey + ez * ez), 2 * (ex * ey - ez * eta), 2 * (ex * ez + ey * eta)],
        [2 * (ex * ey + ez * eta), 1 - 2 * (ex * ex + ez * ez), 2 * (ey * ez - ex * eta)],
        [2 * (ex * ez - ey * eta), 2 * (ey * ez + ex * eta), 1 - 2 * (ex * ex + ey * ey)],
    ])


def quat_mul(a, b):
    """Hamilton product a (x) b, scalar-first."""
    aw, av = a[0], np.asarray(a[1:])
    bw, bv = b[0], np.asarray(b[1:])
    return np.concatenate(([aw * bw - av @ bv], aw * bv + bw * av + np.cross(av, bv)))


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_error_vec(q, q_ref):
    """Vector part of q (x) q_ref^-1 after hemisphere-aligning q_ref to q."""
    if q @ q_ref < 0.0:
        q_ref = -q_ref
    return quat_mul(q, quat_conj(q_ref))[1:]


def quat_right_mat(b):
    """Matrix Rm(b) with quat_mul(a, b) == Rm(b) @ a."""
    bw, bx, by, bz = b
    return np.array([
        [bw, -bx, -by, -bz],
        [bx, bw, bz, -by],
        [by, -bz, bw, bx],
        [bz, by, -bx, bw],
    ])


def quat_rate_matrix(q):
    """4x3 matrix G with dq/dt = 0.5 * G(q) @ omega (world angular velocity).

    First row is -eps^T, lower block eta*I - hat(eps); at identity this is
    [0; I3]. The map is tangent: q^T (G @ w) == 0 for every w.
    """
    eta, eps = q[0], np.asarray(q[1:])
    G = np.empty((4, 3))
    G[0, :] = -eps
    G[1:, :] = eta * np.eye(3) - hat(eps)
    return G


def transform(R=None, p=None):
    """Homogeneous transform from rotation and translation."""
    T = np.eye(4)
    if R is not None:
        T[:3, :3] = R
    if p is not None:
        T[:3, 3] = p
    return T


def transform_rpy(xyz, rpy):
    return transform(rpy_to_matrix(rpy), np.asarray(xyz, dtype=float))
