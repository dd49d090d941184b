"""Step-size rules: scalar 1/a_t schedules, cumulative-derivative matrices,
and the running information accumulator used by recursive likelihood updates.
"""

import math
import re

import numpy as np

from .errors import ConfigError, NumericError

_COND_LIMIT = 1e12
_PROBE_TS = (1, 2, 3, 4, 5, 6, 7, 8, 16, 64, 256, 1024)


class StepSizeRule:
    """Matrix step-size gamma_t(z).

    ``gamma_at(t, z, history)`` returns the m x m step matrix.  Rules whose
    matrix is built from a running sum provide ``run_factory``; the engine
    calls ``for_run()`` once per trajectory to get a fresh evaluator, so the
    rule object itself stays immutable and shareable.
    """

    def __init__(self, gamma_at, inverse_increment=None, kind="custom",
                 run_factory=None, label=None):
        self.gamma_at = gamma_at
        self.inverse_increment = inverse_increment
        self.kind = kind
        self.label = label
        self._run_factory = run_factory

    def for_run(self):
        if self._run_factory is not None:
            return self._run_factory()
        return self.gamma_at

    def __repr__(self):
        return f"StepSizeRule(kind={self.kind!r}, label={self.label!r})"


def _eye_like(z):
    return np.eye(np.asarray(z).shape[0])


def rule_scalar(a, label=None):
    """gamma_t = (1/a(t)) * I for a positive, nondecreasing a."""
    prev = 0.0
    for t in _PROBE_TS:
        at = float(a(t))
        if not at > 0.0:
            raise ConfigError(f"step denominator must be positive, a({t}) = {at}")
        if at < prev:
            raise ConfigError(f"step denominator must be nondecreasing, a({t}) = {at} < a(prev) = {prev}")
        prev = at

    def gamma_at(t, z, history=None):
        return _eye_like(z) / float(a(t))

    def inverse_increment(t, z):
        prev = float(a(t - 1)) if t > 1 else 0.0
        return (float(a(t)) - prev) * _eye_like(z)

    return StepSizeRule(gamma_at, inverse_increment, kind="scalar", label=label)


def rule_matrix(gamma_at, inverse_increment=None, label=None):
    """Wrap an arbitrary (t, z, history) -> matrix function as a rule."""
    return StepSizeRule(gamma_at, inverse_increment, kind="matrix", label=label)


def _invert_guarded(g_inv, t):
    g_inv = np.asarray(g_inv, dtype=np.float64)
    if not np.isfinite(g_inv).all():
        raise NumericError("non-finite inverse step matrix", t=t)
    cond = np.linalg.cond(g_inv)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise NumericError(
            f"inverse step matrix is singular or ill-conditioned (cond ~ {cond:.3g})", t=t)
    return np.linalg.solve(g_inv, np.eye(g_inv.shape[0]))


def rule_optimal_from_jacobian(field, gamma0_inv=None):
    """Cumulative-derivative rule: inverse step = gamma0_inv - sum of drift
    Jacobians, each evaluated at the iterate current when its step ran.

    ``gamma0_inv`` (default identity) regularizes the start; it must be
    symmetric positive semi-definite.  A singular accumulated matrix raises
    at the step where inversion first fails.
    """
    jac = getattr(field, "regression_jacobian", None)
    if jac is None:
        raise ConfigError("field has no regression_jacobian; cumulative rule unavailable")
    m = field.root.shape[0]
    if gamma0_inv is None:
        g0 = np.eye(m)
    else:
        g0 = np.asarray(gamma0_inv, dtype=np.float64)
        if g0.shape != (m, m):
            raise ConfigError(f"gamma0_inv must be {m}x{m}, got {g0.shape}")
        if not np.allclose(g0, g0.T, atol=1e-12):
            raise ConfigError("gamma0_inv must be symmetric")
        if np.linalg.eigvalsh(g0).min() < -1e-12:
            raise ConfigError("gamma0_inv must be positive semi-definite")

    def run_factory():
        acc = g0.copy()
        state = {"t": 0, "gamma": None}

        def gamma_at(t, z, history=None):
            nonlocal acc
            if t == state["t"]:
                return state["gamma"]
            if t != state["t"] + 1:
                raise ConfigError(
                    f"cumulative rule must be queried sequentially, got t={t} after t={state['t']}")
            acc = acc - np.asarray(jac(t, z), dtype=np.float64)
            state["t"] = t
            state["gamma"] = _invert_guarded(acc, t)
            return state["gamma"]

        return gamma_at

    def inverse_increment(t, z):
        return -np.asarray(jac(t, z), dtype=np.float64)

    def gamma_at_unstarted(t, z, history=None):
        raise ConfigError("cumulative rule is stateful; use for_run() to get an evaluator")

    return StepSizeRule(gamma_at_unstarted, inverse_increment,
                        kind="cumulative-jacobian", run_factory=run_factory)


class FisherAccumulator:
    """Running sum of conditional score outer products."""

    def __init__(self, matrix, count=0):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.count = int(count)

    def __repr__(self):
        return f"FisherAccumulator(count={self.count})"


def fisher_update(acc, increment):
    """Add one score vector's outer product, or a ready PSD matrix increment.

    Vector input v contributes v v^T.  Matrix input must be symmetric to
    1e-10 and positive semi-definite.
    """
    inc = np.asarray(increment, dtype=np.float64)
    if inc.ndim == 0:
        inc = inc.reshape(1, 1)
    if inc.ndim == 1:
        inc = np.outer(inc, inc)
    elif inc.ndim == 2:
        scale = 1.0 + float(np.abs(inc).max())
        if np.abs(inc - inc.T).max() > 1e-10 * scale:
            raise ConfigError("information increment must be symmetric")
        if np.linalg.eigvalsh(0.5 * (inc + inc.T)).min() < -1e-10 * scale:
            raise ConfigError("information increment must be positive semi-definite")
    else:
        raise ConfigError(f"increment must be a vector or matrix, got ndim={inc.ndim}")
    if inc.shape != acc.matrix.shape:
        raise ConfigError(f"increment shape {inc.shape} != accumulator shape {acc.matrix.shape}")
    return FisherAccumulator(acc.matrix + inc, acc.count + 1)


_NUM = r"[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?"
_EXPR_RE = re.compile(
    rf"^\s*(?P<log>log\()?\s*(?:(?P<c>{_NUM})\s*(?:\*\s*(?P<t1>t))?|(?P<t2>t))"
    rf"\s*(?:\^\s*(?P<p>-?{_NUM}))?\s*(?(log)\))\s*$"
)


def parse_time_expression(expr):
    """Tiny grammar for time schedules: c | c*t | t | c*t^p | t^p | log(c*t).

    Returns a callable f(t); the source string is kept on ``f.expr`` so
    configurations can be serialized back losslessly.
    """
    if callable(expr):
        return expr
    m = _EXPR_RE.match(str(expr))
    if m is None:
        raise ConfigError(f"cannot parse time expression {expr!r}")
    c = float(m.group("c")) if m.group("c") else 1.0
    has_t = bool(m.group("t1") or m.group("t2"))
    p = float(m.group("p")) if m.group("p") else 1.0
    use_log = bool(m.group("log"))
    if m.group("p") and not has_t:
        raise ConfigError(f"exponent without t in {expr!r}")
    if use_log and not has_t:
        raise ConfigError(f"log() of a constant in {expr!r}")

    if use_log:
        def f(t):
            return math.log(c * float(t) ** p)
    elif has_t:
        def f(t):
            return c * float(t) ** p
    else:
        def f(t):
            return c

    f.expr = str(expr)
    return f
