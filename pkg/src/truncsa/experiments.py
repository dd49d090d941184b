"""Scenario configuration and the Monte Carlo harness.

A scenario bundles a model family ("poly", "gamma", "ar1", "linear"), its
parameters, a step rule, a truncation schedule, and run settings.  Scenarios
are plain data: they load from and save to TOML exactly.

Each family has two execution paths that produce the same process:

* a compiled/pure kernel fast path used for mass replication runs;
* a generic-engine path (``build_config`` -> ``sa_run``) used by diagnostics,
  cross-checks, and configurations the kernels do not cover.

Per-replication randomness: replication r draws from a fresh generator seeded
``base_seed + r``; multi-start scenarios reuse the same seed for every start
so starts share their noise.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._backend import BACKEND, kernels
from .diagnostics import linearity_residual, log_checkpoints, rate_tracker
from .errors import ConfigError, NumericError
from .estimators import ar1_batch_estimate
from .sa_core import (FieldModel, SaConfig, Trajectory, make_noise_gaussian,
                      make_noise_student_t, sa_run)
from .specfun import digamma, trigamma
from .stepsize import parse_time_expression, rule_matrix, rule_scalar
from .tomlio import dumps_toml, load_toml, loads_toml, parse_toml_literal
from .truncation import schedule_from_config, schedule_trivial

__all__ = [
    "Scenario", "scenario_from_toml", "scenario_from_dict", "scenario_to_toml",
    "builtin_scenario", "builtin_names", "build_config", "run_replication",
    "run_scenario", "emit_histogram", "apply_override",
]

FAMILIES = ("poly", "gamma", "ar1", "linear")
OUTPUT_KINDS = ("trajectory", "histogram", "linearity", "rate")


@dataclass
class Scenario:
    name: str
    kind: str
    horizon: int
    replications: int
    model: dict
    step: dict
    truncation: dict
    seed: int = 0
    checkpoints: list = dc_field(default_factory=list)
    outputs: list = dc_field(default_factory=list)
    histogram: dict = dc_field(
        default_factory=lambda: {"bins": 40, "range": "auto", "statistic": "final"})

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "horizon": self.horizon,
            "replications": self.replications,
            "seed": self.seed,
            "checkpoints": list(self.checkpoints),
            "outputs": list(self.outputs),
            "model": dict(self.model),
            "step": dict(self.step),
            "truncation": dict(self.truncation),
            "histogram": dict(self.histogram),
        }


def _validate_scenario(sc):
    if sc.kind not in FAMILIES:
        raise ConfigError(f"unknown scenario kind {sc.kind!r}; expected one of {FAMILIES}")
    if sc.horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {sc.horizon}")
    if sc.replications < 1:
        raise ConfigError(f"replications must be >= 1, got {sc.replications}")
    for out in sc.outputs:
        if out not in OUTPUT_KINDS:
            raise ConfigError(f"unknown output {out!r}; expected subset of {OUTPUT_KINDS}")
    for t in sc.checkpoints:
        if not 1 <= int(t) <= sc.horizon:
            raise ConfigError(f"checkpoint {t} outside [1, {sc.horizon}]")
    bins = sc.histogram.get("bins", 40)
    if int(bins) < 2:
        raise ConfigError(f"histogram needs >= 2 bins, got {bins}")
    stat = sc.histogram.get("statistic", "final")
    if stat not in ("final", "scaled_error"):
        raise ConfigError(f"unknown histogram statistic {stat!r}")
    rng = sc.histogram.get("range", "auto")
    if rng != "auto" and (not isinstance(rng, (list, tuple)) or len(rng) != 2):
        raise ConfigError(f"histogram range must be 'auto' or [lo, hi], got {rng!r}")
    return sc


def scenario_from_dict(data):
    data = dict(data)
    unknown = set(data) - {"name", "kind", "horizon", "replications", "seed",
                           "checkpoints", "outputs", "model", "step",
                           "truncation", "histogram"}
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        sc = Scenario(
            name=str(data["name"]),
            kind=str(data["kind"]),
            horizon=int(data["horizon"]),
            replications=int(data["replications"]),
            model=dict(data.get("model", {})),
            step=dict(data.get("step", {})),
            truncation=dict(data.get("truncation", {"kind": "trivial"})),
            seed=int(data.get("seed", 0)),
            checkpoints=[int(t) for t in data.get("checkpoints", [])],
            outputs=list(data.get("outputs", [])),
            histogram=dict(data.get("histogram",
                                    {"bins": 40, "range": "auto", "statistic": "final"})),
        )
    except KeyError as exc:
        raise ConfigError(f"scenario misses required key {exc}") from None
    return _validate_scenario(sc)


def scenario_from_toml(source):
    """Load a scenario from a TOML path or string."""
    if isinstance(source, str) and "\n" not in source and os.path.exists(source):
        return scenario_from_dict(load_toml(source))
    return scenario_from_dict(loads_toml(source))


def scenario_to_toml(sc):
    return dumps_toml(sc.to_dict())


def apply_override(sc, key, value):
    """Apply a dotted override like ``model.theta=0.5`` to a scenario copy."""
    if isinstance(value, str):
        value = parse_toml_literal(value)
    data = sc.to_dict()
    parts = key.split(".")
    target = data
    for p in parts[:-1]:
        if p not in target or not isinstance(target[p], dict):
            raise ConfigError(f"override path {key!r} does not exist")
        target = target[p]
    target[parts[-1]] = value
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# Builtins


def builtin_names():
    return ("poly", "gamma_mt", "gamma_ft", "ar1", "linear")


def builtin_scenario(name):
    """Preconfigured scenarios mirroring the bundled simulation studies."""
    if name == "poly":
        return scenario_from_dict({
            "name": "poly",
            "kind": "poly",
            "horizon": 100000,
            "replications": 500,
            "seed": 1,
            "outputs": ["histogram"],
            "model": {
                "z0": 2.0,
                "z_init": 0.0,
                "coeffs": [3.0, 0.0, 0.0, 0.0, 5.0, -2.0, 1.0],
                "noise": {"kind": "student_t", "df": 7.0},
            },
            "step": {"kind": "scalar", "a": "3*t"},
            "truncation": {"kind": "expanding", "u": "log(3*t)"},
            "histogram": {"bins": 40, "range": "auto", "statistic": "final"},
        })
    if name in ("gamma_mt", "gamma_ft"):
        trunc = ({"kind": "gamma_mt", "c1": 0.1, "c2": 1.0} if name == "gamma_mt"
                 else {"kind": "fixed", "lower": 0.003, "upper": 100.0})
        return scenario_from_dict({
            "name": name,
            "kind": "gamma",
            "horizon": 100000,
            "replications": 200,
            "seed": 1,
            "outputs": ["histogram"],
            "model": {"theta": 0.1, "theta_init": 1.0},
            "step": {"kind": "gamma_fisher"},
            "truncation": trunc,
            "histogram": {"bins": 40, "range": "auto", "statistic": "final"},
        })
    if name == "ar1":
        return scenario_from_dict({
            "name": "ar1",
            "kind": "ar1",
            "horizon": 2000,
            "replications": 1000,
            "seed": 1,
            "outputs": ["histogram"],
            "model": {"theta": 0.5, "theta_init": 0.0, "info_init": 1.0, "x_init": 0.0},
            "step": {"kind": "rls"},
            "truncation": {"kind": "trivial"},
            "histogram": {"bins": 40, "range": "auto", "statistic": "scaled_error"},
        })
    if name == "linear":
        return scenario_from_dict({
            "name": "linear",
            "kind": "linear",
            "horizon": 10000,
            "replications": 50,
            "seed": 1,
            "outputs": ["linearity"],
            "model": {"z0": 1.0, "z_init": 0.0, "noise": {"kind": "gaussian", "sigma": 1.0}},
            "step": {"kind": "scalar", "a": "t"},
            "truncation": {"kind": "trivial"},
        })
    raise ConfigError(f"unknown builtin {name!r}; choose from {builtin_names()}")


# ---------------------------------------------------------------------------
# Model-family helpers


def _noise_model(cfg):
    cfg = dict(cfg or {"kind": "gaussian", "sigma": 1.0})
    kind = cfg.get("kind")
    if kind == "gaussian":
        return make_noise_gaussian(cfg.get("sigma", 1.0))
    if kind == "student_t":
        return make_noise_student_t(cfg.get("df", 7.0))
    raise ConfigError(f"unknown noise kind {kind!r}")


def _poly_drift(coeffs, u):
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * u + c
    return -(acc * u)


def _poly_coeffs(model):
    coeffs = [float(c) for c in model.get("coeffs", [1.0])]
    if not coeffs or all(c == 0.0 for c in coeffs):
        raise ConfigError("poly model needs at least one nonzero coefficient")
    return coeffs


def _linear_time_coefficient(expr, *, inside_log=False):
    """Return c when expr is exactly c*t (optionally log(c*t)); else None."""
    from .stepsize import _EXPR_RE

    m = _EXPR_RE.match(str(expr))
    if m is None:
        return None
    if bool(m.group("log")) != inside_log:
        return None
    if not (m.group("t1") or m.group("t2")):
        return None
    if m.group("p") and float(m.group("p")) != 1.0:
        return None
    return float(m.group("c")) if m.group("c") else 1.0


def _poly_field(model):
    z0 = float(model["z0"])
    coeffs = _poly_coeffs(model)
    noise_model = _noise_model(model.get("noise"))

    def regression(t, z, history=None):
        return np.array([_poly_drift(coeffs, float(z[0]) - z0)])

    def jacobian(t, z):
        u = float(z[0]) - z0
        d = 0.0
        for i, c in enumerate(coeffs, start=1):
            d += i * c * u ** (i - 1)
        return np.array([[-d]])

    return FieldModel(root=np.array([z0]), regression=regression,
                      noise=noise_model, regression_jacobian=jacobian,
                      noise_kind="state_free",
                      noise_batch=lambda rng, T: noise_model.batch(rng, T, 1))


def _gamma_field(model, logx):
    theta = float(model["theta"])
    if not theta > 0.0:
        raise ConfigError(f"gamma model needs theta > 0, got {theta}")
    psi_root = digamma(theta)

    def regression(t, z, history=None):
        u = float(z[0])
        return np.array([(psi_root - digamma(u)) / trigamma(u)])

    def noise(t, z, rng=None):
        u = float(z[0])
        return np.array([(logx[t - 1] - psi_root) / trigamma(u)])

    return FieldModel(root=np.array([theta]), regression=regression,
                      noise=noise, noise_kind="deterministic")


def _ar1_field(model, x):
    theta = float(model["theta"])

    def regression(t, z, history=None):
        xp = x[t - 1]
        return np.array([xp * xp * (theta - float(z[0]))])

    def noise(t, z, rng=None):
        xi = x[t] - theta * x[t - 1]
        return np.array([x[t - 1] * xi])

    return FieldModel(root=np.array([theta]), regression=regression,
                      noise=noise, noise_kind="state_free")


def _gamma_draw_logx(model, rng, horizon):
    theta = float(model["theta"])
    return np.log(rng.gamma(theta, 1.0, horizon))


def _ar1_draw_path(model, rng, horizon):
    xi = rng.standard_normal(horizon)
    x = np.empty(horizon + 1)
    x[0] = float(model.get("x_init", 0.0))
    kernels.ar1_path(x[0], float(model["theta"]), xi, x[1:])
    return x


def build_config(sc, seed, z_init=None, record_root_noise=None):
    """Generic-engine configuration for one replication of a scenario.

    Observation-driven families (gamma, ar1) pre-draw their data here with
    the replication's generator, exactly as the kernel path does, so both
    paths see the same randomness.
    """
    T = sc.horizon
    if sc.kind == "poly":
        field = _poly_field(sc.model)
        rule = rule_scalar(parse_time_expression(sc.step.get("a", "t")),
                           label=sc.step.get("a", "t"))
        schedule = schedule_from_config(sc.truncation)
        init = float(sc.model.get("z_init", 0.0)) if z_init is None else float(z_init)
    elif sc.kind == "linear":
        model = dict(sc.model)
        model["coeffs"] = [1.0]
        field = _poly_field(model)
        rule = rule_scalar(parse_time_expression(sc.step.get("a", "t")),
                           label=sc.step.get("a", "t"))
        schedule = schedule_from_config(sc.truncation)
        init = float(sc.model.get("z_init", 0.0)) if z_init is None else float(z_init)
    elif sc.kind == "gamma":
        rng = np.random.default_rng(seed)
        logx = _gamma_draw_logx(sc.model, rng, T)
        field = _gamma_field(sc.model, logx)
        rule = rule_scalar(lambda t: float(t), label="t")
        schedule = schedule_from_config(sc.truncation)
        init = float(sc.model.get("theta_init", 1.0)) if z_init is None else float(z_init)
        if not init > 0.0:
            raise ConfigError(f"theta_init must be positive, got {init}")
    elif sc.kind == "ar1":
        rng = np.random.default_rng(seed)
        x = _ar1_draw_path(sc.model, rng, T)
        info0 = float(sc.model.get("info_init", 1.0))
        if not info0 > 0.0:
            raise ConfigError(f"info_init must be positive, got {info0}")
        info_path = info0 + np.cumsum(x[:-1] ** 2)
        field = _ar1_field(sc.model, x)
        rule = rule_matrix(lambda t, z, h: np.array([[1.0 / info_path[t - 1]]]),
                           label="1/I_t")
        schedule = schedule_trivial()
        init = float(sc.model.get("theta_init", 0.0)) if z_init is None else float(z_init)
    else:
        raise ConfigError(f"unknown scenario kind {sc.kind!r}")
    return SaConfig(initial=np.array([init]), step_rule=rule, truncation=schedule,
                    field=field, horizon=T, seed=seed,
                    record_root_noise=record_root_noise)


# ---------------------------------------------------------------------------
# Kernel fast paths


@dataclass
class RepRun:
    """Raw arrays of one replication plus the hooks diagnostics need."""

    z: np.ndarray
    prop: np.ndarray
    hit: np.ndarray
    eps: np.ndarray       # noise at the pre-step iterate
    eps_root: np.ndarray  # paired draw at the root
    root: float
    gamma_root: object    # t -> scalar gamma_t(root)
    norming: object       # t -> scalar A_t
    info: np.ndarray = None      # ar1 only: running information
    scale_T: float = None        # scale for the scaled_error statistic

    def trajectory(self, seed=None, rep=0, gamma_fn=None):
        T = self.z.shape[0]
        gam = None
        if gamma_fn is not None:
            gam = np.asarray([gamma_fn(t) for t in range(1, T + 1)]).reshape(T, 1, 1)
        return Trajectory(z=self.z[:, None], proposed=self.prop[:, None],
                          eps=self.eps[:, None], truncated=self.hit.astype(bool),
                          eps_root=None if self.eps_root is None else self.eps_root[:, None],
                          gamma=gam, seed=seed, rep=rep)


def _kernel_poly(sc, seed, z_init, a_coef, u_coef):
    T = sc.horizon
    model = sc.model
    rng = np.random.default_rng(seed)
    noise_model = _noise_model(model.get("noise"))
    eps = np.ascontiguousarray(noise_model.batch(rng, T, 1).ravel())
    coeffs = np.asarray(_poly_coeffs(model) if sc.kind == "poly" else [1.0])
    z0 = float(model["z0"])
    out_z = np.empty(T)
    out_prop = np.empty(T)
    out_hit = np.zeros(T, dtype=np.uint8)
    fail = kernels.poly_path(float(z_init), z0, coeffs, a_coef, u_coef, eps,
                             out_z, out_prop, out_hit)
    if fail:
        last = float(z_init) if fail == 1 else float(out_z[int(fail) - 2])
        raise NumericError("non-finite proposal in polynomial recursion",
                           t=int(fail), state=last)
    return RepRun(z=out_z, prop=out_prop, hit=out_hit, eps=eps, eps_root=eps,
                  root=z0,
                  gamma_root=lambda t: 1.0 / (a_coef * t),
                  norming=lambda t: math.sqrt(a_coef * t),
                  scale_T=math.sqrt(a_coef * T))


def _kernel_gamma(sc, seed, theta_init):
    T = sc.horizon
    model = sc.model
    theta = float(model["theta"])
    rng = np.random.default_rng(seed)
    logx = np.ascontiguousarray(_gamma_draw_logx(model, rng, T))
    trunc = sc.truncation
    if trunc.get("kind") == "gamma_mt":
        moving, c1, c2, lo, hi = 1, float(trunc["c1"]), float(trunc["c2"]), 0.0, 0.0
        if not (c1 > 0 and c2 > 0):
            raise ConfigError(f"gamma_mt constants must be positive: {trunc}")
    elif trunc.get("kind") == "fixed":
        lo, hi = float(trunc["lower"]), float(trunc["upper"])
        if not 0.0 < lo < hi:
            raise ConfigError(f"gamma fixed bounds must satisfy 0 < lower < upper: {trunc}")
        moving, c1, c2 = 0, 0.0, 0.0
    else:
        raise ConfigError(f"gamma scenarios use gamma_mt or fixed truncation, got {trunc}")
    out_theta = np.empty(T)
    out_prop = np.empty(T)
    out_hit = np.zeros(T, dtype=np.uint8)
    out_dig = np.empty(T)
    out_trig = np.empty(T)
    fail = kernels.gamma_shape_path(float(theta_init), logx, moving, c1, c2, lo, hi,
                                    out_theta, out_prop, out_hit, out_dig, out_trig)
    if fail:
        raise NumericError("non-finite proposal in Gamma-shape recursion", t=int(fail))
    psi_root = digamma(theta)
    trig_root = trigamma(theta)
    eps_root = (logx - psi_root) / trig_root
    # noise term of the drift/noise decomposition, evaluated where the kernel
    # evaluated it: out_trig[i] is trigamma at the pre-step estimate
    eps = (logx - psi_root) / out_trig
    return RepRun(z=out_theta, prop=out_prop, hit=out_hit, eps=eps, eps_root=eps_root,
                  root=theta,
                  gamma_root=lambda t: 1.0 / t,
                  norming=lambda t: math.sqrt(t),
                  scale_T=math.sqrt(T))


def _kernel_ar1(sc, seed, theta_init):
    T = sc.horizon
    model = sc.model
    theta = float(model["theta"])
    info0 = float(model.get("info_init", 1.0))
    if not info0 > 0.0:
        raise ConfigError(f"info_init must be positive, got {info0}")
    rng = np.random.default_rng(seed)
    x = _ar1_draw_path(model, rng, T)
    out_theta = np.empty(T)
    out_info = np.empty(T)
    kernels.ar1_rls(float(theta_init), info0, x, out_theta, out_info)
    eps = x[:-1] * (x[1:] - theta * x[:-1])
    return RepRun(z=out_theta, prop=out_theta.copy(), hit=np.zeros(T, dtype=np.uint8),
                  eps=eps, eps_root=eps, root=theta,
                  gamma_root=lambda t: 1.0 / out_info[t - 1],
                  norming=lambda t: math.sqrt(out_info[t - 1]),
                  info=out_info, scale_T=math.sqrt(out_info[-1]))


def run_replication(sc, seed, z_init=None):
    """Run one replication, via the kernel backend when the configuration is
    in kernel-supported form, otherwise through the generic engine."""
    if sc.kind in ("poly", "linear"):
        a_coef = _linear_time_coefficient(sc.step.get("a", "t"))
        trunc = sc.truncation
        if trunc.get("kind") == "trivial":
            u_coef = 0.0
        elif trunc.get("kind") == "expanding":
            u_coef = _linear_time_coefficient(trunc.get("u", ""), inside_log=True)
            if u_coef is not None and math.log(u_coef) <= 0.0:
                raise ConfigError(
                    f"expanding bound log({u_coef}*t) is not positive at t=1")
        else:
            u_coef = None
        init = (float(sc.model.get("z_init", 0.0)) if z_init is None else float(z_init))
        if a_coef is not None and u_coef is not None:
            return _kernel_poly(sc, seed, init, a_coef, u_coef)
    elif sc.kind == "gamma":
        init = (float(sc.model.get("theta_init", 1.0)) if z_init is None else float(z_init))
        if not init > 0.0:
            raise ConfigError(f"theta_init must be positive, got {init}")
        if sc.step.get("kind", "gamma_fisher") == "gamma_fisher":
            return _kernel_gamma(sc, seed, init)
    elif sc.kind == "ar1":
        init = (float(sc.model.get("theta_init", 0.0)) if z_init is None else float(z_init))
        if sc.step.get("kind", "rls") == "rls":
            return _kernel_ar1(sc, seed, init)

    # generic-engine fallback
    cfg = build_config(sc, seed, z_init=z_init, record_root_noise=True)
    traj = sa_run(cfg)
    gamma_path = traj.gamma[:, 0, 0]
    return RepRun(z=traj.z[:, 0], prop=traj.proposed[:, 0],
                  hit=traj.truncated.astype(np.uint8), eps=traj.eps[:, 0],
                  eps_root=None if traj.eps_root is None else traj.eps_root[:, 0],
                  root=float(cfg.field.root[0]),
                  gamma_root=lambda t: float(gamma_path[t - 1]),
                  norming=lambda t: 1.0 / math.sqrt(float(gamma_path[t - 1])),
                  scale_T=1.0 / math.sqrt(float(gamma_path[-1])))


# ---------------------------------------------------------------------------
# Histogram + scenario runner


def emit_histogram(samples, spec, path=None):
    """Deterministic binning of a sample vector; optionally write CSV rows
    ``bin_left,bin_right,count``.  Returns (edges, counts)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ConfigError(f"histogram needs at least 2 samples, got {samples.size}")
    bins = int(spec.get("bins", 40))
    if bins < 2:
        raise ConfigError(f"histogram needs >= 2 bins, got {bins}")
    rng = spec.get("range", "auto")
    if rng == "auto":
        lo, hi = float(samples.min()), float(samples.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = float(rng[0]), float(rng[1])
        if not lo < hi:
            raise ConfigError(f"histogram range must satisfy lo < hi, got {rng}")
        samples = np.clip(samples, lo, hi)
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write("bin_left,bin_right,count\n")
            for i in range(bins):
                fh.write(f"{edges[i]:.17g},{edges[i + 1]:.17g},{counts[i]}\n")
    return edges, counts


def _statistic(run, sc):
    stat_kind = sc.histogram.get("statistic", "final")
    if stat_kind == "final":
        return float(run.z[-1])
    return float(run.scale_T * (run.z[-1] - run.root))


@dataclass
class RepOutcome:
    rep: int
    start_index: int
    seed: int
    final: float
    stat: float
    lin_rows: list = None      # [(t, residual_norm)]
    eta_last: float = None
    rate_rows: list = None     # [(t, value)]
    traj: Trajectory = None
    batch_estimates: np.ndarray = None


class _RootOnly:
    """Just enough of a field for linearity reconstruction."""

    def __init__(self, root):
        self.root = np.atleast_1d(np.asarray(root, dtype=np.float64))


def _run_outcome(sc, rep, start_index, z_init, base_seed, needs):
    seed = base_seed + rep
    try:
        run = run_replication(sc, seed, z_init=z_init)
    except NumericError as exc:
        err = NumericError(f"replication {rep} (seed {seed}) aborted: {exc}")
        err.t, err.state = exc.t, exc.state
        raise err from exc
    out = RepOutcome(rep=rep, start_index=start_index, seed=seed,
                     final=float(run.z[-1]), stat=_statistic(run, sc))
    checkpoints = sc.checkpoints or log_checkpoints(sc.horizon)
    if needs["trajectory"]:
        out.traj = run.trajectory(seed=seed, rep=rep, gamma_fn=run.gamma_root)
        if sc.kind == "ar1":
            x = _ar1_draw_path(sc.model, np.random.default_rng(seed), sc.horizon)
            out.batch_estimates = ar1_batch_estimate(
                x, float(sc.model.get("theta_init", 0.0)),
                float(sc.model.get("info_init", 1.0)))
    if needs["linearity"]:
        if run.eps_root is None:
            raise ConfigError("linearity output needs paired root draws")
        traj = run.trajectory(seed=seed, rep=rep)
        rep_field = _RootOnly(run.root)
        report = linearity_residual(traj, rep_field,
                                    lambda t: np.array([[run.gamma_root(t)]]),
                                    lambda t: np.array([[run.norming(t)]]),
                                    checkpoints=checkpoints)
        out.lin_rows = list(zip(report.checkpoints, report.residual_norm.tolist()))
        out.eta_last = float(report.eta[-1][0, 0])
    if needs["rate"]:
        traj = out.traj or run.trajectory(seed=seed, rep=rep)
        delta = float(sc.model.get("rate_delta", 0.9))
        a_expr = sc.step.get("a")
        a_fn = parse_time_expression(a_expr) if a_expr else (lambda t: float(t))
        report = rate_tracker(traj, np.array([run.root]), a_fn, delta,
                              checkpoints=checkpoints)
        out.rate_rows = list(zip(report.checkpoints, report.values.tolist()))
    return out


def run_scenario(sc, base_seed=None, out_dir=".", jobs=1):
    """Run all replications, write requested outputs, and return the summary.

    Files land in ``out_dir``: the resolved scenario, a ``summary.json`` with
    moments and quantiles of the recorded statistic, and one CSV per
    requested output kind.  Replication r uses seed ``base_seed + r``.
    """
    sc = _validate_scenario(sc)
    base_seed = sc.seed if base_seed is None else int(base_seed)
    os.makedirs(out_dir, exist_ok=True)

    starts = sc.model.get("z_init" if sc.kind in ("poly", "linear") else "theta_init")
    if isinstance(starts, (list, tuple)):
        start_list = [float(s) for s in starts]
    else:
        start_list = [None]
    needs = {k: (k in sc.outputs) for k in OUTPUT_KINDS}

    tasks = [(rep, j) for rep in range(sc.replications) for j in range(len(start_list))]

    def work(task):
        rep, j = task
        return _run_outcome(sc, rep, j, start_list[j], base_seed, needs)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, tasks))
    else:
        outcomes = [work(t) for t in tasks]

    paths = {}
    prefix = os.path.join(out_dir, sc.name)

    scenario_path = os.path.join(out_dir, "scenario.toml")
    resolved = sc.to_dict()
    resolved["seed"] = base_seed
    with open(scenario_path, "w") as fh:
        fh.write(dumps_toml(resolved))
    paths["scenario"] = scenario_path

    if needs["trajectory"]:
        by_start = {}
        for o in outcomes:
            by_start.setdefault(o.start_index, []).append(o)
        for j, group in sorted(by_start.items()):
            suffix = f"_start{j}" if len(start_list) > 1 else ""
            tpath = f"{prefix}_trajectory{suffix}.csv"
            with open(tpath, "w", newline="") as fh:
                first = True
                for o in group:
                    if first:
                        o.traj.to_csv(fh)
                        first = False
                    else:
                        body = o.traj.to_csv_string()
                        fh.write(body.split("\n", 1)[1])
            paths[f"trajectory{suffix}"] = tpath
        if sc.kind == "ar1":
            bpath = f"{prefix}_batch_compare.csv"
            with open(bpath, "w", newline="") as fh:
                fh.write("t,rep,theta_rec,theta_batch\n")
                for o in outcomes:
                    for i in range(sc.horizon):
                        fh.write(f"{i + 1},{o.rep},{o.traj.z[i, 0]:.17g},"
                                 f"{o.batch_estimates[i]:.17g}\n")
            paths["batch_compare"] = bpath

    if needs["histogram"]:
        hpath = f"{prefix}_histogram.csv"
        emit_histogram([o.stat for o in outcomes], sc.histogram, path=hpath)
        paths["histogram"] = hpath

    if needs["linearity"]:
        lpath = f"{prefix}_linearity.csv"
        with open(lpath, "w", newline="") as fh:
            fh.write("rep,t,residual_norm\n")
            for o in outcomes:
                for t, v in o.lin_rows:
                    fh.write(f"{o.rep},{t},{v:.17g}\n")
        checkpoints = sc.checkpoints or log_checkpoints(sc.horizon)
        med = []
        for i, t in enumerate(checkpoints):
            med.append(float(np.median([o.lin_rows[i][1] for o in outcomes])))
        report = {
            "checkpoints": [int(t) for t in checkpoints],
            "residual_norm": med,
            "eta_estimate": [[float(np.median([o.eta_last for o in outcomes]))]],
        }
        jpath = f"{prefix}_linearity.json"
        with open(jpath, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths["linearity"] = lpath
        paths["linearity_report"] = jpath

    if needs["rate"]:
        rpath = f"{prefix}_rate.csv"
        with open(rpath, "w", newline="") as fh:
            fh.write("rep,t,value\n")
            for o in outcomes:
                for t, v in o.rate_rows:
                    fh.write(f"{o.rep},{t},{v:.17g}\n")
        paths["rate"] = rpath

    stats = np.asarray([o.stat for o in outcomes])
    qs = {p: float(np.quantile(stats, q))
          for p, q in (("p05", 0.05), ("p25", 0.25), ("p50", 0.5),
                       ("p75", 0.75), ("p95", 0.95))}
    summary = {
        "name": sc.name,
        "kind": sc.kind,
        "backend": BACKEND,
        "base_seed": base_seed,
        "horizon": sc.horizon,
        "replications": sc.replications,
        "runs": len(outcomes),
        "statistic": sc.histogram.get("statistic", "final"),
        "mean": float(stats.mean()),
        "variance": float(stats.var(ddof=1)) if stats.size > 1 else 0.0,
        "quantiles": qs,
        "outputs": paths,
    }
    spath = os.path.join(out_dir, "summary.json")
    with open(spath, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary["summary_path"] = spath
    return summary
