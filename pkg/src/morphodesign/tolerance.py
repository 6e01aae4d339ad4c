"""Gaussian-process interpolation of tracking-error tolerance bounds.

Each of the six error axes (three position, three orientation) gets an
independent scalar GP over time. Anchor waypoints contribute zero-mean
observations whose noise standard deviation is half the stated tolerance
(so the 95% band at an anchor reproduces the tolerance); between anchors the
posterior variance relaxes back toward the prior. The usable bound is the
95% band ``2 * posterior_std``: tight at the anchors, relaxed elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_F2_POSITION = 0.005
SIGMA_F2_ORIENTATION = 0.015
LENGTHSCALE = 1.0
_JITTER = 1e-12


def rbf_kernel(ta, tb, sigma_f2, lengthscale):
    ta = np.asarray(ta, dtype=float)[:, None]
    tb = np.asarray(tb, dtype=float)[None, :]
    return sigma_f2 * np.exp(-((ta - tb) ** 2) / lengthscale ** 2)


@dataclass
class GPBoundModel:
    """Per-axis GPs sharing anchor times; queryable posterior variance."""

    times: np.ndarray            # (Nt,)
    xi: np.ndarray               # (Nt, 6) anchor tolerances
    sigma_f2: np.ndarray         # (6,) prior signal variance per axis
    lengthscale: float
    _chol: list = None           # per-axis Cholesky of K + Sigma

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.xi.shape != (self.times.size, 6):
            raise ValueError("anchor tolerances must be (n_anchors, 6)")
        if np.any(self.xi <= 0):
            raise ValueError("anchor tolerances must be positive")
        uniq, counts = np.unique(np.round(self.times, 12), return_counts=True)
        if np.any(counts > 1):
            dups = uniq[counts > 1]
            raise ValueError(f"duplicate anchor times {dups.tolist()} make K+Sigma singular")
        self._chol = []
        for axis in range(6):
            K = rbf_kernel(self.times, self.times, self.sigma_f2[axis], self.lengthscale)
            noise_var = (self.xi[:, axis] / 2.0) ** 2
            A = K + np.diag(noise_var) + _JITTER * np.eye(self.times.size)
            self._chol.append(np.linalg.cholesky(A))

    def posterior_variance(self, t):
        """(len(t), 6) posterior variance at query times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t.size, 6))
        for axis in range(6):
            k_star = rbf_kernel(t, self.times, self.sigma_f2[axis], self.lengthscale)
            L = self._chol[axis]
            v = np.linalg.solve(L, k_star.T)
            out[:, axis] = self.sigma_f2[axis] - np.sum(v * v, axis=0)
        return np.maximum(out, 0.0)


def fit(anchors, sigma_f2_pos=SIGMA_F2_POSITION, sigma_f2_ori=SIGMA_F2_ORIENTATION,
        lengthscale=LENGTHSCALE):
    """Fit the bound model from anchors [(t_k, xi_k 6-vector), ...]."""
    if not len(anchors):
        raise ValueError("need at least one anchor")
    times = np.array([a[0] for a in anchors], dtype=float)
    xi = np.array([np.broadcast_to(np.asarray(a[1], dtype=float), (6,)) for a in anchors])
    sigma_f2 = np.array([sigma_f2_pos] * 3 + [sigma_f2_ori] * 3)
    return GPBoundModel(times, xi, sigma_f2, lengthscale)


def fit_waypoints(waypoints, **kwargs):
    anchors = [(w.t, np.concatenate([w.tol_pos, w.tol_ori])) for w in waypoints]
    return fit(anchors, **kwargs)


def bounds(model: GPBoundModel, t):
    """Tolerance band 2*sigma(t) per axis; shape (len(t), 6)."""
    return 2.0 * np.sqrt(model.posterior_variance(t))


@dataclass
class TrackingReport:
    ok: bool
    first_violation: int = -1
    axis: int = -1
    max_ratio: float = 0.0      # worst |error| / bound over all samples
    anchor_ok: bool = True


def check_tracking(model: GPBoundModel, times, err_pos, err_ori, anchor_indices=None):
    """Verify per-sample errors against the interpolated bounds.

    ``anchor_indices`` maps each anchor to its sample index; at those samples
    the raw anchor tolerance is enforced as well. Returns a TrackingReport
    with the first violating sample (if any) and the worst error/bound ratio
    for graded penalties.
    """
    times = np.asarray(times, dtype=float)
    err = np.hstack([np.abs(np.asarray(err_pos, dtype=float)),
                     np.abs(np.asarray(err_ori, dtype=float))])
    band = bounds(model, times)
    ratio = err / band
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    ok = True
    first, axis = -1, -1
    viol = np.argwhere(ratio > 1.0)
    if viol.size:
        ok = False
        first, axis = int(viol[0][0]), int(viol[0][1])

    anchor_ok = True
    if anchor_indices is None:
        anchor_indices = [int(np.argmin(np.abs(times - t))) for t in model.times]
    for a, idx in enumerate(anchor_indices):
        r = err[idx] / model.xi[a]
        max_ratio = max(max_ratio, float(r.max()))
        if np.any(r > 1.0):
            anchor_ok = False
            if ok:
                ok = False
                first, axis = int(idx), int(np.argmax(r))
    return TrackingReport(ok and anchor_ok, first, axis, max_ratio, anchor_ok)
