"""Numerical checks of the asymptotic claims on simulated paths.

Nothing here proves a limit theorem; each routine turns a stated asymptotic
property into a finite-sample quantity that either passes a tolerance or is
reported for trend inspection:

* the linear-representation residual A_t (Z_t - Z_t*), where Z_t* rebuilds the
  iterate from root-noise partial sums only;
* the rate functional a_t^delta ||Z_t - root||^2;
* sign/strength probes of the drift field over grids;
* a log-log fit of the drift's local expansion at the root;
* weighted running means (the averaging helper behind several checks).
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .truncation import contains, distance_range

__all__ = [
    "LinearityReport", "RateReport", "DriftStrength", "ExpansionFit",
    "log_checkpoints", "linearity_residual", "rate_tracker",
    "probe_drift_sign", "probe_drift_strength", "probe_local_expansion",
    "toeplitz_average",
]


def log_checkpoints(horizon, count=20):
    """Logarithmically spaced unique step indices in [1, horizon]."""
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    pts = np.geomspace(1, horizon, num=min(count, horizon))
    return sorted(set(int(round(p)) for p in pts))


@dataclass
class LinearityReport:
    checkpoints: list
    z: np.ndarray            # (k, m) iterates at checkpoints
    z_star: np.ndarray       # (k, m) linear reconstruction at checkpoints
    residual: np.ndarray     # (k, m) A_t (Z_t - Z_t*)
    residual_norm: np.ndarray
    norming: list            # (m, m) matrices used
    eta: Optional[list]      # A_t gamma_t(root) A_t per checkpoint

    def to_dict(self):
        return {
            "checkpoints": [int(t) for t in self.checkpoints],
            "residual_norm": [float(v) for v in self.residual_norm],
            "eta_estimate": [np.asarray(e).tolist() for e in self.eta] if self.eta else None,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


@dataclass
class RateReport:
    checkpoints: list
    values: np.ndarray       # a_t^delta * ||Z_t - root||^2
    delta: float

    def to_dict(self):
        return {
            "checkpoints": [int(t) for t in self.checkpoints],
            "values": [float(v) for v in self.values],
            "delta": self.delta,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def linearity_residual(traj, field, gamma_at_root, norming, checkpoints=None,
                       compute_eta=True):
    """Residual between the trajectory and its linear reconstruction.

    The reconstruction uses only the paired noise-at-root draws:
    Z_t* = root + gamma_t(root) * sum of the first t of them.  It is therefore
    unchanged by anything the truncation did to the actual iterates.
    """
    if traj.eps_root is None:
        raise ConfigError(
            "trajectory has no paired root-noise draws; re-run with record_root_noise=True")
    T = traj.horizon
    if checkpoints is None:
        checkpoints = log_checkpoints(T)
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > T:
        raise ConfigError(f"checkpoints must lie in [1, {T}]")
    root = np.asarray(field.root, dtype=np.float64)
    m = root.shape[0]
    sums = np.cumsum(traj.eps_root, axis=0)

    k = len(checkpoints)
    z = np.empty((k, m))
    z_star = np.empty((k, m))
    resid = np.empty((k, m))
    normers = []
    etas = [] if compute_eta else None
    for i, t in enumerate(checkpoints):
        g = np.atleast_2d(np.asarray(gamma_at_root(t), dtype=np.float64))
        a = np.atleast_2d(np.asarray(norming(t), dtype=np.float64))
        z[i] = traj.z[t - 1]
        z_star[i] = root + g @ sums[t - 1]
        resid[i] = a @ (z[i] - z_star[i])
        normers.append(a)
        if compute_eta:
            etas.append(a @ g @ a)
    return LinearityReport(checkpoints=checkpoints, z=z, z_star=z_star,
                           residual=resid,
                           residual_norm=np.linalg.norm(resid, axis=1),
                           norming=normers, eta=etas)


def rate_tracker(traj, z0, a, delta, checkpoints=None):
    """Sequence a_t^delta * squared distance to the root at checkpoints."""
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"delta must be in (0, 1], got {delta}")
    T = traj.horizon
    if checkpoints is None:
        checkpoints = log_checkpoints(T)
    checkpoints = sorted(set(int(t) for t in checkpoints))
    if not checkpoints or checkpoints[0] < 1 or checkpoints[-1] > T:
        raise ConfigError(f"checkpoints must lie in [1, {T}]")
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    vals = np.empty(len(checkpoints))
    for i, t in enumerate(checkpoints):
        at = float(a(t))
        if not at > 0.0:
            raise ConfigError(f"a({t}) must be positive, got {at}")
        vals[i] = at ** delta * float(np.sum((traj.z[t - 1] - z0) ** 2))
    return RateReport(checkpoints=checkpoints, values=vals, delta=delta)


def _grid_points(grid, m):
    pts = np.asarray(grid, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None] if m == 1 else pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != m or pts.shape[0] == 0:
        raise ConfigError(f"grid must be nonempty with points of dimension {m}")
    return pts


def probe_drift_sign(field, z0, t, grid):
    """Worst inner product (z - root)^T drift(z) over the grid; <= 0 passes."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    pts = _grid_points(grid, z0.shape[0])
    worst = -math.inf
    for z in pts:
        r = np.atleast_1d(np.asarray(field.regression(t, z, None), dtype=np.float64))
        worst = max(worst, float((z - z0) @ r))
    return worst


@dataclass(frozen=True)
class DriftStrength:
    """Grid infimum of -(z - root)^T drift(z) over an annulus.

    ``empty = True`` means the annulus cannot meet the constraint set at all;
    the value is then the conventional sentinel 1.
    """

    value: float
    empty: bool = False


def probe_drift_strength(field, z0, t, eps, grid, u_set=None):
    """Minimum repelling strength on eps <= ||z - root|| <= 1/eps.

    Grid points outside the annulus (or outside ``u_set`` when given) are
    ignored.  If ``u_set`` provably misses the annulus the sentinel result
    (1, empty) is returned; a grid that merely fails to sample a nonempty
    intersection is an error.
    """
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must be in (0, 1), got {eps}")
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    pts = _grid_points(grid, z0.shape[0])
    if u_set is not None:
        dmin, dmax = distance_range(u_set, z0)
        if dmin > 1.0 / eps or dmax < eps:
            return DriftStrength(1.0, empty=True)
    best = math.inf
    hits = 0
    for z in pts:
        d = float(np.linalg.norm(z - z0))
        if not eps <= d <= 1.0 / eps:
            continue
        if u_set is not None and not contains(u_set, z):
            continue
        hits += 1
        r = np.atleast_1d(np.asarray(field.regression(t, z, None), dtype=np.float64))
        best = min(best, -float((z - z0) @ r))
    if hits == 0:
        raise ConfigError(
            "no grid point falls in the annulus; refine the grid or check eps")
    return DriftStrength(best, empty=False)


@dataclass(frozen=True)
class ExpansionFit:
    """Fitted local behaviour of drift(root + u) + u ~ C ||u||^p."""

    p: float
    log_c: float
    exact_linear: bool
    radii: tuple
    deviations: tuple


_LINEAR_FLOOR = 1e-13


def probe_local_expansion(regression, z0, radii, direction=None):
    """Log-log fit of the drift's deviation from its linearization at the root.

    ``regression`` maps a point to the drift vector and must be scaled so the
    derivative at the root is minus the identity.  When every deviation sits
    below the numerical floor the field is reported exactly linear.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2 or any(r <= 0 for r in radii):
        raise ConfigError("need at least two positive radii")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("radii must be strictly decreasing")
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.float64))
    m = z0.shape[0]
    if direction is None:
        e = np.zeros(m)
        e[0] = 1.0
    else:
        e = np.asarray(direction, dtype=np.float64)
        e = e / np.linalg.norm(e)
    devs = []
    for r in radii:
        u = r * e
        val = np.atleast_1d(np.asarray(regression(z0 + u), dtype=np.float64))
        devs.append(float(np.linalg.norm(val + u)))
    devs = np.asarray(devs)
    if np.all(devs <= _LINEAR_FLOOR * (1.0 + np.asarray(radii))):
        return ExpansionFit(p=math.inf, log_c=-math.inf, exact_linear=True,
                            radii=tuple(radii), deviations=tuple(devs))
    if np.any(devs <= 0.0):
        raise ConfigError("zero deviation off the floor; radii span too wide")
    slope, intercept = np.polyfit(np.log(radii), np.log(devs), 1)
    return ExpansionFit(p=float(slope), log_c=float(intercept), exact_linear=False,
                        radii=tuple(radii), deviations=tuple(devs))


def toeplitz_average(weights, values):
    """Running weighted means (sum a_i v_i) / (sum a_i) for k = 1..n.

    Entries before the first positive weight come out as NaN; the overall
    weight sum must be positive.
    """
    a = np.asarray(weights, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if a.shape != v.shape or a.ndim != 1 or a.size == 0:
        raise ConfigError("weights and values must be equal-length nonempty vectors")
    if np.any(a < 0.0):
        raise ConfigError("weights must be non-negative")
    den = np.cumsum(a)
    if den[-1] <= 0.0:
        raise ConfigError("total weight must be positive")
    num = np.cumsum(a * v)
    with np.errstate(invalid="ignore", divide="ignore"):
        return num / den
