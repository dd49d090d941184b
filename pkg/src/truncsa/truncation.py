"""Convex truncation sets, metric projection, and time-indexed schedules.

Representable sets are axis-aligned boxes, Euclidean balls, and the whole
space; every schedule used by the bundled procedures is one of these, and all
three have closed-form nearest-point maps.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError


def _vec(x, dim=None):
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if v.ndim != 1:
        raise ConfigError(f"expected a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] == 1 and dim > 1:
        v = np.repeat(v, dim)
    return v


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _vec(self.lower))
        object.__setattr__(self, "upper", _vec(self.upper))
        if self.lower.shape != self.upper.shape:
            raise ConfigError("box bounds must have equal dimension")
        if not np.all(self.lower <= self.upper):
            raise ConfigError(f"degenerate box: lower {self.lower} above upper {self.upper}")


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius >= 0.0:
            raise ConfigError(f"ball radius must be >= 0, got {self.radius}")


@dataclass(frozen=True)
class WholeSpace:
    pass


WHOLE_SPACE = WholeSpace()


def project(cset, z):
    """Nearest point of the set in Euclidean norm (z itself when inside)."""
    z = np.asarray(z, dtype=np.float64)
    if isinstance(cset, WholeSpace):
        return z
    if isinstance(cset, Box):
        return np.clip(z, cset.lower, cset.upper)
    if isinstance(cset, Ball):
        d = z - cset.center
        dist = float(np.linalg.norm(d))
        if dist <= cset.radius:
            return z
        if dist == 0.0:
            return cset.center.copy()
        return cset.center + (cset.radius / dist) * d
    raise ConfigError(f"not a convex set: {cset!r}")


def contains(cset, z, tol=0.0):
    z = np.asarray(z, dtype=np.float64)
    if isinstance(cset, WholeSpace):
        return True
    if isinstance(cset, Box):
        return bool(np.all(z >= cset.lower - tol) and np.all(z <= cset.upper + tol))
    if isinstance(cset, Ball):
        return float(np.linalg.norm(z - cset.center)) <= cset.radius + tol
    raise ConfigError(f"not a convex set: {cset!r}")


def distance_range(cset, z):
    """(min, max) Euclidean distance from z to points of the set.

    max is inf for unbounded sets.  Used by condition probes to decide whether
    an annulus around a root can intersect the set at all.
    """
    z = np.asarray(z, dtype=np.float64)
    if isinstance(cset, WholeSpace):
        return 0.0, math.inf
    if isinstance(cset, Box):
        nearest = np.clip(z, cset.lower, cset.upper)
        farthest = np.where(np.abs(cset.lower - z) > np.abs(cset.upper - z), cset.lower, cset.upper)
        return float(np.linalg.norm(nearest - z)), float(np.linalg.norm(farthest - z))
    if isinstance(cset, Ball):
        c = float(np.linalg.norm(z - cset.center))
        return max(0.0, c - cset.radius), c + cset.radius
    raise ConfigError(f"not a convex set: {cset!r}")


@dataclass(frozen=True)
class TruncationSchedule:
    """Time-indexed family of convex clamping sets.

    ``set_at(t, history)`` returns the set active at step t >= 1; schedules
    that ignore the past accept ``history=None``.
    """

    set_at: Callable[[int, Optional[object]], object]
    kind: str

    def __call__(self, t, history=None):
        return self.set_at(t, history)


def schedule_trivial(dim=1):
    """No truncation: every step's set is the whole space."""
    return TruncationSchedule(lambda t, h=None: WHOLE_SPACE, kind="trivial")


def schedule_fixed(lower, upper):
    """Same box at every step; bounds must be strictly ordered."""
    lo, hi = _vec(lower), _vec(upper)
    if lo.shape != hi.shape:
        raise ConfigError("fixed schedule bounds must have equal dimension")
    if not np.all(lo < hi):
        raise ConfigError(f"fixed schedule needs lower < upper, got {lo} vs {hi}")
    box = Box(lo, hi)
    return TruncationSchedule(lambda t, h=None: box, kind="fixed")


def schedule_expanding(u, dim=1):
    """Symmetric boxes [-u(t), u(t)] from a positive, typically growing u."""

    def set_at(t, h=None):
        ut = float(u(t))
        if not ut > 0.0:
            raise ConfigError(f"expanding schedule needs u(t) > 0, got u({t}) = {ut}")
        bound = np.full(dim, ut)
        return Box(-bound, bound)

    return TruncationSchedule(set_at, kind="expanding")


def schedule_gamma_mt(c1, c2):
    """Moving bounds [c1/sqrt(log(t+2)), c2*(t+2)]: floor sinks to 0, cap grows."""
    c1, c2 = float(c1), float(c2)
    if not (c1 > 0.0 and c2 > 0.0):
        raise ConfigError(f"gamma_mt constants must be positive, got c1={c1}, c2={c2}")

    def set_at(t, h=None):
        lo = c1 / math.sqrt(math.log(t + 2.0))
        hi = c2 * (t + 2.0)
        return Box(lo, hi)

    return TruncationSchedule(set_at, kind="shrinking-floor")


def schedule_shrinking_aux(aux, c, d, a, variant="sum"):
    """Balls around an auxiliary estimate with radius shrinking like the rates.

    Radius is c*(1/d(t) + 1/a(t)) for the "sum" variant, or
    c*max(1/d(t), 1/a(t)) for "max".  ``aux`` may take just the step index, or
    (t, history) to track a live auxiliary estimator during a run.
    """
    import inspect

    c = float(c)
    if variant not in ("sum", "max"):
        raise ConfigError(f"variant must be 'sum' or 'max', got {variant!r}")
    aux_takes_history = len(inspect.signature(aux).parameters) >= 2

    def set_at(t, h=None):
        dt, at = float(d(t)), float(a(t))
        if not (dt > 0.0 and at > 0.0):
            raise ConfigError(f"rates must be positive at t={t}: d={dt}, a={at}")
        if variant == "sum":
            r = c * (1.0 / dt + 1.0 / at)
        else:
            r = c * max(1.0 / dt, 1.0 / at)
        if not r > 0.0:
            raise ConfigError(f"nonpositive radius {r} at t={t}")
        center = aux(t, h) if aux_takes_history else aux(t)
        return Ball(_vec(center), r)

    return TruncationSchedule(set_at, kind="shrinking-around-auxiliary")


def admissibility_probe(schedule, z0, t_range):
    """First index t* with z0 inside the set for every t in [t*, max(t_range)].

    Finite-horizon surrogate for the requirement that the target is
    eventually never clipped.  Returns None when no such index exists in
    the probed range.
    """
    ts = sorted(int(t) for t in t_range)
    if not ts:
        raise ConfigError("empty probe range")
    z0 = _vec(z0)
    inside = [contains(schedule(t), z0) for t in ts]
    t_star = None
    for t, ok in zip(ts, inside):
        if ok:
            if t_star is None:
                t_star = t
        else:
            t_star = None
    return t_star


def schedule_from_config(cfg, dim=1):
    """Build a schedule from a plain mapping, e.g. parsed TOML.

    Recognized kinds: trivial | fixed {lower, upper} | expanding {u}
    | gamma_mt {c1, c2}.  ``u`` is a step-size style expression such as
    "log(3*t)" (see stepsize.parse_time_expression).
    """
    from .stepsize import parse_time_expression

    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"truncation config needs a 'kind': {cfg!r}")
    kind = cfg["kind"]
    try:
        if kind == "trivial":
            return schedule_trivial(dim)
        if kind == "fixed":
            return schedule_fixed(cfg["lower"], cfg["upper"])
        if kind == "expanding":
            return schedule_expanding(parse_time_expression(cfg["u"]), dim)
        if kind == "gamma_mt":
            return schedule_gamma_mt(cfg["c1"], cfg["c2"])
    except KeyError as exc:
        raise ConfigError(f"truncation config {cfg!r} missing key {exc}") from None
    raise ConfigError(f"unknown truncation kind {kind!r}")
