"""Dense convex quadratic programming.

Solves

    min  0.5 x^T H x + g^T x
    s.t. A_eq x = b_eq
         lb <= A_in x <= ub

with H symmetric positive definite. The primary path is a full-step
active-set iteration (warm-startable, exact equality satisfaction via direct
KKT solves); if it stalls or cycles, a long-step primal-dual interior-point
method takes over. Solutions are verified against a KKT residual tolerance.
"""

from __future__ import annotations

import numpy as np


class QPInfeasibleError(RuntimeError):
    """Raised when no point satisfies the constraints to tolerance."""


class QPResult:
    __slots__ = ("x", "active_set", "iterations", "kkt_residual", "method")

    def __init__(self, x, active_set, iterations, kkt_residual, method):
        self.x = x
        self.active_set = active_set
        self.iterations = iterations
        self.kkt_residual = kkt_residual
        self.method = method


def _solve_kkt(H, g, A_eq, b_eq, rows, rhs):
    """Equality-constrained solve with the given active inequality rows."""
    n = H.shape[0]
    blocks = [A_eq] if A_eq is not None and A_eq.size else []
    rhs_parts = [b_eq] if A_eq is not None and A_eq.size else []
    if rows.size:
        blocks.append(rows)
        rhs_parts.append(rhs)
    if not blocks:
        return np.linalg.solve(H, -g), np.empty(0)
    A = np.vstack(blocks)
    b = np.concatenate(rhs_parts)
    m = A.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    r = np.concatenate([-g, b])
    sol = np.linalg.solve(K, r)
    return sol[:n], sol[n:]


def kkt_residual(H, g, A_eq, b_eq, A_in, lb, ub, x, tol_comp=1e-8):
    """Max of stationarity-free feasibility residuals (primal only)."""
    res = 0.0
    if A_eq is not None and A_eq.size:
        res = max(res, float(np.max(np.abs(A_eq @ x - b_eq), initial=0.0)))
    if A_in is not None and A_in.size:
        v = A_in @ x
        res = max(res, float(np.max(lb - v, initial=0.0)))
        res = max(res, float(np.max(v - ub, initial=0.0)))
    return res


def solve_qp(H, g, A_eq=None, b_eq=None, A_in=None, lb=None, ub=None,
             warm_active=None, tol=1e-8, max_iter=200):
    """Solve the QP; returns a QPResult.

    ``warm_active`` is an iterable of signed inequality indices from a prior
    related solve (+i for upper bound i active, -(i+1) for lower bound i).
    Raises QPInfeasibleError when the constraints are inconsistent.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = H.shape[0]
    if A_in is None or not np.size(A_in):
        A_in = np.zeros((0, n))
        lb = np.zeros(0)
        ub = np.zeros(0)
    else:
        A_in = np.asarray(A_in, dtype=float)
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
    if A_eq is not None and np.size(A_eq):
        A_eq = np.asarray(A_eq, dtype=float)
        b_eq = np.asarray(b_eq, dtype=float)
    else:
        A_eq = None
        b_eq = None

    result = _active_set(H, g, A_eq, b_eq, A_in, lb, ub, warm_active, tol, max_iter)
    if result is None:
        result = _interior_point(H, g, A_eq, b_eq, A_in, lb, ub, tol)
    if result is None:
        raise QPInfeasibleError("QP solver failed to find a feasible optimum")
    return result


def _active_set(H, g, A_eq, b_eq, A_in, lb, ub, warm_active, tol, max_iter):
    m = A_in.shape[0]
    active = []
    if warm_active:
        active = [a for a in warm_active if -m <= a < m]
    seen = set()
    for it in range(max_iter):
        rows = []
        rhs = []
        act_ids = []
        for a in active:
            if a >= 0:
                rows.append(A_in[a])
                rhs.append(ub[a])
            else:
                rows.append(-A_in[-a - 1])
                rhs.append(-lb[-a - 1])
            act_ids.append(a)
        rows = np.array(rows) if rows else np.empty((0, H.shape[0]))
        rhs = np.array(rhs) if rhs else np.empty(0)
        try:
            x, lam = _solve_kkt(H, g, A_eq, b_eq, rows, rhs)
        except np.linalg.LinAlgError:
            return None
        n_eq = A_eq.shape[0] if A_eq is not None else 0
        lam_in = lam[n_eq:] if lam.size else np.empty(0)

        # drop the most negative multiplier among active inequalities
        if lam_in.size and np.min(lam_in) < -tol:
            drop = int(np.argmin(lam_in))
            active.pop(drop)
            key = tuple(sorted(active))
            if key in seen:
                return None  # cycling; hand off to interior point
            seen.add(key)
            continue

        # add the most violated inactive inequality
        if m:
            v = A_in @ x
            up_viol = v - ub
            lo_viol = lb - v
            for a in active:
                if a >= 0:
                    up_viol[a] = -np.inf
                else:
                    lo_viol[-a - 1] = -np.inf
            iu = int(np.argmax(up_viol)) if m else 0
            il = int(np.argmax(lo_viol)) if m else 0
            cand = None
            if up_viol[iu] > tol or lo_viol[il] > tol:
                cand = iu if up_viol[iu] >= lo_viol[il] else (-il - 1)
            if cand is not None:
                active.append(cand)
                key = tuple(sorted(active))
                if key in seen:
                    return None  # cycling; hand off to interior point
                seen.add(key)
                continue

        res = kkt_residual(H, g, A_eq, b_eq, A_in, lb, ub, x)
        if res > 10 * tol:
            return None
        return QPResult(x, list(active), it + 1, res, "active-set")
    return None


def _interior_point(H, g, A_eq, b_eq, A_in, lb, ub, tol, max_iter=100):
    """Primal-dual IP on the slack form with two-sided inequalities."""
    n = H.shape[0]
    m = A_in.shape[0]
    n_eq = A_eq.shape[0] if A_eq is not None else 0

    # stack as C x + s = d with s >= 0 (upper rows then negated lower rows)
    finite_u = np.isfinite(ub)
    finite_l = np.isfinite(lb)
    C = np.vstack([A_in[finite_u], -A_in[finite_l]])
    d = np.concatenate([ub[finite_u], -lb[finite_l]])
    mi = C.shape[0]

    x = np.zeros(n)
    s = np.maximum(d - C @ x, 1.0)
    z = np.ones(mi)
    y = np.zeros(n_eq)

    for it in range(max_iter):
        r_dual = H @ x + g + C.T @ z
        if n_eq:
            r_dual += A_eq.T @ y
        r_eq = (A_eq @ x - b_eq) if n_eq else np.zeros(0)
        r_in = C @ x + s - d
        mu = (s @ z) / mi if mi else 0.0
        if (np.max(np.abs(r_dual), initial=0.0) < tol
                and np.max(np.abs(r_eq), initial=0.0) < tol
                and np.max(np.abs(r_in), initial=0.0) < tol
                and mu < tol):
            res = kkt_residual(H, g, A_eq, b_eq, A_in, lb, ub, x)
            return QPResult(x, _extract_active(A_in, lb, ub, x), it, res, "interior-point")

        sigma_mu = 0.1 * mu
        s_safe = np.maximum(s, 1e-14)
        W = z / s_safe
        Hbar = H + C.T @ (W[:, None] * C)
        rhs = -(r_dual + C.T @ (W * r_in + (sigma_mu - s * z) / s_safe))
        # reduce with equalities via a KKT system
        if n_eq:
            K = np.zeros((n + n_eq, n + n_eq))
            K[:n, :n] = Hbar
            K[:n, n:] = A_eq.T
            K[n:, :n] = A_eq
            r = np.concatenate([rhs, -r_eq])
            try:
                sol = np.linalg.solve(K, r)
            except np.linalg.LinAlgError:
                return None
            dx = sol[:n]
            dy = sol[n:]
        else:
            try:
                dx = np.linalg.solve(Hbar, rhs)
            except np.linalg.LinAlgError:
                return None
            dy = np.zeros(0)
        ds = -(r_in + C @ dx)
        dz = (sigma_mu - s * z - z * ds) / s_safe

        alpha = 1.0
        neg = ds < 0
        if np.any(neg):
            alpha = min(alpha, 0.995 * np.min(-s[neg] / ds[neg]))
        neg = dz < 0
        if np.any(neg):
            alpha = min(alpha, 0.995 * np.min(-z[neg] / dz[neg]))
        x = x + alpha * dx
        s = s + alpha * ds
        z = z + alpha * dz
        if n_eq:
            y = y + alpha * dy
    return None


def _extract_active(A_in, lb, ub, x, tol=1e-7):
    if not A_in.shape[0]:
        return []
    v = A_in @ x
    out = []
    for i in range(A_in.shape[0]):
        if np.isfinite(ub[i]) and ub[i] - v[i] < tol:
            out.append(i)
        elif np.isfinite(lb[i]) and v[i] - lb[i] < tol:
            out.append(-i - 1)
    return out
