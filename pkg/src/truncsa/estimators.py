"""Concrete recursive estimators: linear procedures, AR(1) least squares,
generic M-estimation steps, and the Gamma-shape recursive MLE.

All estimators consume observations one at a time; none of them ever refits
from the full sample.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .specfun import digamma, trigamma
from .truncation import TruncationSchedule, project

__all__ = [
    "LinearProcedure", "linear_step",
    "Ar1State", "ar1_init", "ar1_step", "ar1_batch_estimate",
    "m_estimator_step",
    "GammaMleState", "gamma_mle_init", "gamma_mle_step",
    "load_observations",
]


@dataclass(frozen=True)
class LinearProcedure:
    """Recursion z <- z + gamma_t (h_t - beta_t z) for adapted data h_t and a
    predictable positive semi-definite beta_t."""

    gamma_rule: object
    beta_at: object          # t -> (m, m) matrix
    h_at: object             # (t, observation) -> (m,) vector


def linear_step(proc, state, t, observation=None):
    z = np.atleast_1d(np.asarray(state, dtype=np.float64))
    gamma = np.asarray(proc.gamma_rule.gamma_at(t, z, None), dtype=np.float64)
    beta = np.atleast_2d(np.asarray(proc.beta_at(t), dtype=np.float64))
    h = np.atleast_1d(np.asarray(proc.h_at(t, observation), dtype=np.float64))
    if beta.shape != (z.shape[0], z.shape[0]) or h.shape != z.shape:
        raise ConfigError(
            f"dimension mismatch at t={t}: state {z.shape}, beta {beta.shape}, h {h.shape}")
    out = z + gamma @ (h - beta @ z)
    if not np.isfinite(out).all():
        raise NumericError("non-finite linear-procedure update", t=t, state=z)
    return out


@dataclass(frozen=True)
class Ar1State:
    """Recursive least-squares state for X_t = theta X_{t-1} + xi_t."""

    theta_hat: float
    info: float
    last_x: float


def ar1_init(theta0=0.0, info0=1.0, x0=0.0):
    if not info0 > 0.0:
        raise ConfigError(f"initial information must be positive, got {info0}")
    return Ar1State(float(theta0), float(info0), float(x0))


def ar1_step(state, x_new):
    """One update: info grows by last_x^2, the estimate moves by the scaled
    one-step prediction error."""
    xp = state.last_x
    info = state.info + xp * xp
    theta = state.theta_hat + xp * (float(x_new) - state.theta_hat * xp) / info
    return Ar1State(theta, info, float(x_new))


def ar1_batch_estimate(x, theta0=0.0, info0=1.0):
    """Closed-form equivalent of running ar1_step over the whole path
    x = (X_0, ..., X_T): the information-weighted least-squares solution with
    the starting pair as a prior observation.  Returns estimates for t=1..T.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ConfigError("need a path (X_0, ..., X_T) with T >= 1")
    num = float(info0) * float(theta0) + np.cumsum(x[:-1] * x[1:])
    den = float(info0) + np.cumsum(x[:-1] * x[:-1])
    return num / den


def m_estimator_step(psi, gamma_rule, truncation, state, t, observation):
    """Generic truncated estimating-equation step.

    The estimating function and the step matrix are both evaluated at the
    previous estimate; the result is clamped to the step's truncation set.
    """
    if t < 1:
        raise ConfigError(f"step index must be >= 1, got {t}")
    z = np.atleast_1d(np.asarray(state, dtype=np.float64))
    gamma = np.asarray(gamma_rule.gamma_at(t, z, None), dtype=np.float64)
    val = np.atleast_1d(np.asarray(psi(t, observation, z), dtype=np.float64))
    proposed = z + gamma @ val
    if not np.isfinite(proposed).all():
        raise NumericError("non-finite M-estimator proposal", t=t, state=z)
    return project(truncation(t), proposed)


@dataclass(frozen=True)
class GammaMleState:
    """Recursive likelihood state for the shape of a unit-scale Gamma law."""

    theta_hat: float
    t: int
    schedule: TruncationSchedule


def gamma_mle_init(theta0=1.0, schedule=None):
    from .truncation import schedule_gamma_mt

    if not theta0 > 0.0:
        raise ConfigError(f"initial shape estimate must be positive, got {theta0}")
    if schedule is None:
        schedule = schedule_gamma_mt(0.1, 1.0)
    return GammaMleState(float(theta0), 0, schedule)


def gamma_mle_step(state, x_new):
    """One likelihood update: score over accumulated information, clamped.

    The step divisor is t * trigamma(previous estimate), the running Fisher
    information of t unit-scale Gamma observations at that estimate.
    """
    x_new = float(x_new)
    if not x_new > 0.0:
        raise DataError(f"Gamma observations must be positive, got {x_new}")
    t = state.t + 1
    th = state.theta_hat
    info = t * trigamma(th)
    proposed = th + (np.log(x_new) - digamma(th)) / info
    if not np.isfinite(proposed):
        raise NumericError("non-finite shape proposal", t=t, state=th)
    clamped = float(project(state.schedule(t), np.array([proposed]))[0])
    if not clamped > 0.0:
        raise NumericError(f"schedule allowed a non-positive shape {clamped}", t=t)
    return replace(state, theta_hat=clamped, t=t)


def load_observations(path):
    """Read an observation stream from CSV with header ``t,x``; rows must be
    consecutively indexed from 1.  Returns the x column as an array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["t", "x"]:
            raise ConfigError(f"{path}: expected header 't,x', got {header}")
        xs = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 2 or int(row[0]) != i:
                raise ConfigError(f"{path}: bad row {i + 1}: {row}")
            xs.append(float(row[1]))
    if not xs:
        raise ConfigError(f"{path}: no observations")
    return np.asarray(xs, dtype=np.float64)
