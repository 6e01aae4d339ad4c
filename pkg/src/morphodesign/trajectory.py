"""Task-space reference generation.

Position references are piecewise polynomials through the waypoints that
minimize the integrated squared acceleration subject to interpolation and
C2 continuity; sampled speed/acceleration limits and obstacle clearance are
enforced by post-checks (with a bounded waypoint-insertion retry for
clearance). Orientation references interpolate each waypoint pair along the
geodesic via the exponential map, time-synchronized with the position spline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import exp_so3, log_so3, quat_from_matrix

_UNSET = object()


class TrajectoryInfeasibleError(ValueError):
    """Reference generation failed; ``constraint`` names the violated rule."""

    def __init__(self, constraint, detail=""):
        super().__init__(f"trajectory infeasible ({constraint}){': ' + detail if detail else ''}")
        self.constraint = constraint


@dataclass
class Waypoint:
    t: float
    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    tol_pos: np.ndarray = field(default_factory=lambda: np.full(3, 0.01))
    tol_ori: np.ndarray = field(default_factory=lambda: np.full(3, 0.05))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.tol_pos = np.broadcast_to(np.asarray(self.tol_pos, dtype=float), (3,)).copy()
        self.tol_ori = np.broadcast_to(np.asarray(self.tol_ori, dtype=float), (3,)).copy()
        if np.any(self.tol_pos <= 0) or np.any(self.tol_ori <= 0):
            raise ValueError("waypoint tolerances must be positive")


def _check_times(waypoints):
    ts = np.array([w.t for w in waypoints], dtype=float)
    if len(ts) < 2:
        raise ValueError("need at least two waypoints")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("waypoint times must be strictly increasing")
    return ts


class PositionTrajectory:
    """Piecewise polynomial p(t) with analytic derivatives."""

    def __init__(self, knots, coeffs, objective):
        self.knots = knots            # (K+1,) times
        self.coeffs = coeffs          # (K, order+1, 3), local tau in [0, 1]
        self.objective = objective    # integral of ||ddp||^2

    def _locate(self, t):
        k = int(np.searchsorted(self.knots, t, side="right") - 1)
        k = min(max(k, 0), len(self.coeffs) - 1)
        h = self.knots[k + 1] - self.knots[k]
        tau = (t - self.knots[k]) / h
        return k, np.clip(tau, 0.0, 1.0), h

    def eval(self, t, order=0):
        k, tau, h = self._locate(t)
        c = self.coeffs[k]
        n = c.shape[0] - 1
        out = np.zeros(3)
        for i in range(order, n + 1):
            fac = 1.0
            for r in range(order):
                fac *= (i - r)
            out += c[i] * fac * tau ** (i - order)
        return out / h ** order

    def position(self, t):
        return self.eval(t, 0)

    def velocity(self, t):
        return self.eval(t, 1)

    def acceleration(self, t):
        return self.eval(t, 2)


class OrientationTrajectory:
    """Piecewise geodesic R(t) = R_k exp(s * log(R_k^-1 R_{k+1}))."""

    def __init__(self, knots, rotations):
        self.knots = np.asarray(knots, dtype=float)
        self.rotations = [np.asarray(R, dtype=float) for R in rotations]
        self.rotvecs = []
        for k in range(len(rotations) - 1):
            rel = self.rotations[k].T @ self.rotations[k + 1]
            phi = log_so3(rel)
            if np.linalg.norm(phi) > np.pi - 1e-6:
                # rotation angle at/near pi: nudge the target about a fixed
                # axis so the log is well defined (documented degenerate rule)
                rel = rel @ exp_so3(np.array([1e-6, 0.0, 0.0]))
                phi = log_so3(rel)
            self.rotvecs.append(phi)

    def _locate(self, t):
        k = int(np.searchsorted(self.knots, t, side="right") - 1)
        k = min(max(k, 0), len(self.rotvecs) - 1)
        h = self.knots[k + 1] - self.knots[k]
        s = np.clip((t - self.knots[k]) / h, 0.0, 1.0)
        return k, s, h

    def rotation(self, t):
        k, s, _ = self._locate(t)
        return self.rotations[k] @ exp_so3(s * self.rotvecs[k])

    def angular_velocity(self, t):
        """World-frame angular velocity (constant per segment)."""
        k, _, h = self._locate(t)
        return self.rotations[k] @ (self.rotvecs[k] / h)


@dataclass
class TaskTrajectory:
    position: PositionTrajectory
    orientation: OrientationTrajectory
    waypoints: list

    @property
    def t_start(self):
        return self.position.knots[0]

    @property
    def t_end(self):
        return self.position.knots[-1]


@dataclass
class ReferenceTrajectory:
    """Uniform-dt samples consumed by the planner."""

    t: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    ddp: np.ndarray
    R: np.ndarray
    omega: np.ndarray

    def __len__(self):
        return len(self.t)

    def quaternions(self):
        """Sample quaternions, hemisphere-aligned along the trajectory."""
        qs = np.empty((len(self.t), 4))
        prev = None
        for i in range(len(self.t)):
            q = quat_from_matrix(self.R[i])
            if prev is not None and q @ prev < 0.0:
                q = -q
            qs[i] = q
            prev = q
        return qs


def _spline_objective_matrix(order, h):
    n = order + 1
    Q = np.zeros((n, n))
    for i in range(2, n):
        for j in range(2, n):
            Q[i, j] = i * (i - 1) * j * (j - 1) / (i + j - 3)
    return Q / h ** 3


def _deriv_row(order, tau, d):
    row = np.zeros(order + 1)
    for i in range(d, order + 1):
        fac = 1.0
        for r in range(d):
            fac *= (i - r)
        row[i] = fac * tau ** (i - d)
    return row


def _solve_min_accel(ts, points, order, boundary):
    """Minimum-acceleration piecewise polynomial through (ts, points)."""
    K = len(ts) - 1
    nc = order + 1
    N = K * nc
    H = np.zeros((N, N))
    for k in range(K):
        h = ts[k + 1] - ts[k]
        H[k * nc:(k + 1) * nc, k * nc:(k + 1) * nc] = _spline_objective_matrix(order, h)

    rows, rhs = [], []

    def add_row(entries, value):
        row = np.zeros(N)
        for (k, d, tau, scale) in entries:
            row[k * nc:(k + 1) * nc] += scale * _deriv_row(order, tau, d)
        rows.append(row)
        rhs.append(value)

    for k in range(K):
        add_row([(k, 0, 0.0, 1.0)], points[k])
        add_row([(k, 0, 1.0, 1.0)], points[k + 1])
    for k in range(K - 1):
        h0 = ts[k + 1] - ts[k]
        h1 = ts[k + 2] - ts[k + 1]
        add_row([(k, 1, 1.0, 1.0 / h0), (k + 1, 1, 0.0, -1.0 / h1)], np.zeros(3))
        add_row([(k, 2, 1.0, 1.0 / h0 ** 2), (k + 1, 2, 0.0, -1.0 / h1 ** 2)], np.zeros(3))
    if boundary == "rest":
        h0 = ts[1] - ts[0]
        hK = ts[-1] - ts[-2]
        add_row([(0, 1, 0.0, 1.0 / h0)], np.zeros(3))
        add_row([(K - 1, 1, 1.0, 1.0 / hK)], np.zeros(3))
        add_row([(0, 2, 0.0, 1.0 / h0 ** 2)], np.zeros(3))
        add_row([(K - 1, 2, 1.0, 1.0 / hK ** 2)], np.zeros(3))
    elif boundary != "natural":
        raise ValueError(f"unknown boundary condition {boundary!r}")

    A = np.vstack(rows)
    b = np.vstack(rhs)              # (m, 3)
    m = A.shape[0]
    KKT = np.zeros((N + m, N + m))
    KKT[:N, :N] = H
    KKT[:N, N:] = A.T
    KKT[N:, :N] = A
    rhs_full = np.vstack([np.zeros((N, 3)), b])
    sol = np.linalg.solve(KKT, rhs_full)
    coeffs = sol[:N].reshape(K, nc, 3)
    obj = float(np.einsum("kic,kij,kjc->", coeffs,
                          np.stack([_spline_objective_matrix(order, ts[k + 1] - ts[k])
                                    for k in range(K)]), coeffs))
    return coeffs, obj


def plan_position(waypoints, v_max=0.25, a_max=0.5, obstacles=None, order=5,
                  boundary="natural", clearance=0.05, max_retries=3,
                  samples_per_segment=60):
    """Plan the position reference through the waypoints.

    ``obstacles`` is an SDF-like object with ``query(points)`` and
    ``gradient(point)`` (see the collision module); samples must keep
    ``clearance`` distance from it. Raises TrajectoryInfeasibleError naming
    the violated constraint.
    """
    if v_max <= 0 or a_max <= 0:
        raise ValueError("v_max and a_max must be positive")
    ts = _check_times(waypoints)
    pts = [w.position for w in waypoints]

    if obstacles is not None:
        d = obstacles.query(np.array(pts))
        if np.any(d < clearance):
            k = int(np.argmin(d))
            raise TrajectoryInfeasibleError("waypoint_in_obstacle",
                                            f"waypoint {k} clearance {d[k]:.4f} m")

    knot_t = list(ts)
    knot_p = list(pts)
    for attempt in range(max_retries + 1):
        coeffs, obj = _solve_min_accel(np.array(knot_t), np.array(knot_p), order, boundary)
        traj = PositionTrajectory(np.array(knot_t), coeffs, obj)
        t_dense = _dense_times(knot_t, samples_per_segment)
        speeds = np.array([np.linalg.norm(traj.velocity(t)) for t in t_dense])
        accels = np.array([np.linalg.norm(traj.acceleration(t)) for t in t_dense])
        if speeds.max() > v_max * (1 + 1e-9):
            raise TrajectoryInfeasibleError(
                "speed_bound", f"max speed {speeds.max():.4f} > {v_max} m/s for the given timing")
        if accels.max() > a_max * (1 + 1e-9):
            raise TrajectoryInfeasibleError(
                "acceleration_bound", f"max accel {accels.max():.4f} > {a_max} m/s^2")
        if obstacles is None:
            return traj
        pos = np.array([traj.position(t) for t in t_dense])
        dist = obstacles.query(pos)
        worst = int(np.argmin(dist))
        if dist[worst] >= clearance:
            return traj
        if attempt == max_retries:
            raise TrajectoryInfeasibleError(
                "obstacle_clearance", f"clearance {dist[worst]:.4f} m at t={t_dense[worst]:.3f}")
        # push a midpoint along the SDF gradient and retry
        t_bad = t_dense[worst]
        grad = obstacles.gradient(pos[worst])
        norm = np.linalg.norm(grad)
        grad = grad / norm if norm > 1e-9 else np.array([0.0, 0.0, 1.0])
        push = (clearance - dist[worst]) + 0.5 * clearance
        new_p = pos[worst] + push * grad
        idx = int(np.searchsorted(knot_t, t_bad))
        if abs(t_bad - knot_t[idx - 1]) < 1e-6 or (idx < len(knot_t) and abs(t_bad - knot_t[idx]) < 1e-6):
            t_bad += 1e-3
        knot_t.insert(idx, t_bad)
        knot_p.insert(idx, new_p)
    raise TrajectoryInfeasibleError("obstacle_clearance")


def _dense_times(knot_t, per_segment):
    out = []
    for k in range(len(knot_t) - 1):
        out.append(np.linspace(knot_t[k], knot_t[k + 1], per_segment, endpoint=False))
    out.append([knot_t[-1]])
    return np.concatenate(out)


def plan_orientation(waypoints):
    ts = _check_times(waypoints)
    return OrientationTrajectory(ts, [w.rotation for w in waypoints])


def plan_task(waypoints, **kwargs):
    return TaskTrajectory(plan_position(waypoints, **kwargs),
                          plan_orientation(waypoints), list(waypoints))


def sample(traj: TaskTrajectory, dt):
    """Uniform-dt resampling with synchronized orientation samples."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    knots = traj.position.knots
    if dt > np.min(np.diff(knots)):
        raise ValueError("dt larger than the shortest segment duration")
    t0, t1 = traj.t_start, traj.t_end
    n = int(np.ceil((t1 - t0) / dt - 1e-9))
    ts = t0 + dt * np.arange(n + 1)
    ts[-1] = min(ts[-1], t1)
    p = np.array([traj.position.position(t) for t in ts])
    dp = np.array([traj.position.velocity(t) for t in ts])
    ddp = np.array([traj.position.acceleration(t) for t in ts])
    R = np.array([traj.orientation.rotation(t) for t in ts])
    omega = np.array([traj.orientation.angular_velocity(t) for t in ts])
    return ReferenceTrajectory(ts, p, dp, ddp, R, omega)


def constant_pose_trajectory(position, rotation, duration, dt, tol_pos=0.01, tol_ori=0.05):
    """Hold a single pose: the reference for single-waypoint reach tasks."""
    n = int(np.ceil(duration / dt - 1e-9))
    ts = dt * np.arange(n + 1)
    p = np.tile(np.asarray(position, dtype=float), (n + 1, 1))
    R = np.tile(np.asarray(rotation, dtype=float), (n + 1, 1, 1))
    zeros = np.zeros((n + 1, 3))
    return ReferenceTrajectory(ts, p, zeros.copy(), zeros.copy(), R, zeros.copy())
