import json
import math

import numpy as np
import pytest

from truncsa.diagnostics import (linearity_residual, log_checkpoints,
                                 probe_drift_sign, probe_drift_strength,
                                 probe_local_expansion, rate_tracker,
                                 toeplitz_average)
from truncsa.errors import ConfigError
from truncsa.sa_core import (FieldModel, SaConfig, Trajectory,
                             make_noise_gaussian, sa_run)
from truncsa.specfun import digamma, trigamma
from truncsa.stepsize import rule_scalar
from truncsa.truncation import Ball, Box, schedule_fixed, schedule_trivial

from oracles import harmonic_number, weighted_running_mean_loop


def linear_cfg(z0=1.5, horizon=400, seed=2, truncation=None):
    noise = make_noise_gaussian(1.0)
    root = np.array([z0])
    field = FieldModel(root=root,
                       regression=lambda t, z, h: -(z - root),
                       noise=noise, noise_kind="state_free",
                       noise_batch=lambda rng, T: noise.batch(rng, T, 1))
    return SaConfig(initial=np.array([0.0]), step_rule=rule_scalar(lambda t: float(t)),
                    truncation=truncation or schedule_trivial(), field=field,
                    horizon=horizon, seed=seed)


def gamma_root_fn(t):
    return np.array([[1.0 / t]])


def sqrt_norming(t):
    return np.array([[math.sqrt(t)]])


# -- linearity ---------------------------------------------------------------

def test_linearity_residual_zero_in_classical_case():
    cfg = linear_cfg()
    traj = sa_run(cfg)
    report = linearity_residual(traj, cfg.field, gamma_root_fn, sqrt_norming)
    assert report.checkpoints[-1] == 400
    assert np.all(report.residual_norm <= 1e-12)
    # eta = A_t gamma_t A_t = identity here
    for eta in report.eta:
        assert eta[0, 0] == pytest.approx(1.0, rel=1e-12)


def test_linearity_requires_paired_draws():
    cfg = linear_cfg()
    cfg = SaConfig(initial=cfg.initial, step_rule=cfg.step_rule,
                   truncation=cfg.truncation, field=cfg.field,
                   horizon=cfg.horizon, seed=cfg.seed, record_root_noise=False)
    traj = sa_run(cfg)
    with pytest.raises(ConfigError, match="record_root_noise"):
        linearity_residual(traj, cfg.field, gamma_root_fn, sqrt_norming)


def test_reconstruction_invariant_under_schedule_choice():
    # same seed, different admissible truncations: the state-free noise draws
    # coincide, so the rebuilt linear path is identical even though the
    # iterate paths differ
    wide = sa_run(linear_cfg(truncation=schedule_fixed(-10.0, 10.0)))
    tight = sa_run(linear_cfg(truncation=schedule_fixed(1.3, 1.7)))
    assert tight.truncated.any()
    assert not np.array_equal(wide.z, tight.z)
    assert np.array_equal(wide.eps_root, tight.eps_root)
    r1 = linearity_residual(wide, linear_cfg().field, gamma_root_fn, sqrt_norming)
    r2 = linearity_residual(tight, linear_cfg().field, gamma_root_fn, sqrt_norming)
    assert np.array_equal(r1.z_star, r2.z_star)


def test_linearity_report_json_shape():
    cfg = linear_cfg(horizon=64)
    report = linearity_residual(sa_run(cfg), cfg.field, gamma_root_fn,
                                sqrt_norming, checkpoints=[1, 8, 64])
    data = json.loads(report.to_json())
    assert data["checkpoints"] == [1, 8, 64]
    assert len(data["residual_norm"]) == 3
    assert len(data["eta_estimate"]) == 3


def test_linearity_checkpoint_validation():
    cfg = linear_cfg(horizon=10)
    traj = sa_run(cfg)
    with pytest.raises(ConfigError):
        linearity_residual(traj, cfg.field, gamma_root_fn, sqrt_norming,
                           checkpoints=[5, 99])


# -- rate tracker ---------------------------------------------------------------

def _traj_from_path(z):
    z = np.asarray(z, dtype=np.float64)[:, None]
    T = z.shape[0]
    return Trajectory(z=z, proposed=z.copy(), eps=np.zeros((T, 1)),
                      truncated=np.zeros(T, dtype=bool))


def test_rate_tracker_geometric_contraction_vanishes():
    z0 = 2.0
    path = z0 + 1.0 * 0.5 ** np.arange(1, 101)
    rep = rate_tracker(_traj_from_path(path), np.array([z0]),
                       lambda t: float(t), delta=1.0,
                       checkpoints=[1, 10, 50, 100])
    assert rep.values[-1] < 1e-20
    assert np.all(np.diff(rep.values) <= 0)


def test_rate_tracker_frozen_error_diverges_but_reports():
    path = np.full(1000, 3.0)   # frozen at distance 3 from root 0
    rep = rate_tracker(_traj_from_path(path), np.array([0.0]),
                       lambda t: float(t), delta=0.5,
                       checkpoints=[1, 10, 100, 1000])
    expect = np.array([1.0, 10.0, 100.0, 1000.0]) ** 0.5 * 9.0
    assert np.allclose(rep.values, expect, rtol=1e-12)
    assert np.all(np.diff(rep.values) > 0)


def test_rate_tracker_rejects_bad_delta():
    traj = _traj_from_path(np.ones(5))
    for d in (0.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            rate_tracker(traj, np.array([0.0]), lambda t: float(t), d)


# -- drift probes ------------------------------------------------------------------

def poly_field():
    coeffs = [3.0, 0.0, 0.0, 0.0, 5.0, -2.0, 1.0]

    def drift(t, z, h):
        u = float(np.atleast_1d(z)[0]) - 2.0
        acc = coeffs[-1]
        for c in coeffs[-2::-1]:
            acc = acc * u + c
        return np.array([-(acc * u)])

    return FieldModel(root=np.array([2.0]), regression=drift,
                      noise=lambda t, z, rng: np.zeros(1), noise_kind="state_free")


def test_drift_sign_poly_grid_passes():
    t = 50
    bound = math.log(3.0 * t)
    grid = np.linspace(-bound, bound, 1000)
    worst = probe_drift_sign(poly_field(), np.array([2.0]), t, grid)
    assert worst <= 0.0


def test_drift_sign_repelling_field_fails():
    field = FieldModel(root=np.array([0.0]),
                       regression=lambda t, z, h: +z,
                       noise=lambda t, z, rng: np.zeros(1), noise_kind="state_free")
    worst = probe_drift_sign(field, np.array([0.0]), 1, np.linspace(-1, 1, 11))
    assert worst > 0.0


def test_drift_sign_at_root_is_zero():
    assert probe_drift_sign(poly_field(), np.array([2.0]), 3,
                            np.array([2.0])) == 0.0


def attracting_field():
    return FieldModel(root=np.array([1.0]),
                      regression=lambda t, z, h: -(z - 1.0),
                      noise=lambda t, z, rng: np.zeros(1), noise_kind="state_free")


def test_drift_strength_quadratic_minimum_at_inner_radius():
    grid = 1.0 + np.concatenate([np.linspace(0.1, 10.0, 100),
                                 -np.linspace(0.1, 10.0, 100)])
    out = probe_drift_strength(attracting_field(), np.array([1.0]), 1, 0.1, grid)
    assert not out.empty
    assert out.value == pytest.approx(0.01, rel=1e-12)


def test_drift_strength_poly_positive_inside_bounds():
    t = 20
    bound = math.log(3.0 * t)
    grid = np.linspace(-bound, bound, 2001)
    out = probe_drift_strength(poly_field(), np.array([2.0]), t, 0.5, grid,
                               u_set=Box(-bound, bound))
    assert not out.empty
    assert out.value > 0.0


def test_drift_strength_sentinel_when_set_misses_annulus():
    out = probe_drift_strength(attracting_field(), np.array([1.0]), 1, 0.1,
                               np.linspace(0, 2, 50),
                               u_set=Ball([1.0], 0.05))
    assert out.empty
    assert out.value == 1.0


def test_drift_strength_coarse_grid_is_an_error():
    with pytest.raises(ConfigError):
        probe_drift_strength(attracting_field(), np.array([1.0]), 1, 0.1,
                             np.array([1.0]))   # only the root itself
    with pytest.raises(ConfigError):
        probe_drift_strength(attracting_field(), np.array([1.0]), 1, 1.2,
                             np.linspace(0, 2, 5))


# -- local expansion ----------------------------------------------------------------

def test_local_expansion_quadratic():
    fit = probe_local_expansion(lambda z: np.array([-(z[0] - 1.0) + (z[0] - 1.0) ** 2]),
                                np.array([1.0]),
                                radii=[0.1, 0.05, 0.02, 0.01, 0.005])
    assert not fit.exact_linear
    assert fit.p == pytest.approx(2.0, abs=0.05)


def test_local_expansion_exact_linear():
    fit = probe_local_expansion(lambda z: np.array([-(z[0] - 1.0)]),
                                np.array([1.0]), radii=[0.1, 0.01, 0.001])
    assert fit.exact_linear
    assert fit.p == math.inf


def test_local_expansion_gamma_score_field():
    # drift of the shape recursion, scaled so the slope at the root is -1
    theta = 0.7
    psi_t = digamma(theta)

    def drift(z):
        u = float(z[0])
        return np.array([(psi_t - digamma(u)) / trigamma(u)])

    fit = probe_local_expansion(drift, np.array([theta]),
                                radii=[0.05, 0.02, 0.01, 0.005, 0.002])
    assert fit.p == pytest.approx(2.0, abs=0.2)


def test_local_expansion_requires_decreasing_radii():
    with pytest.raises(ConfigError):
        probe_local_expansion(lambda z: -z, np.array([0.0]), radii=[0.01, 0.1])
    with pytest.raises(ConfigError):
        probe_local_expansion(lambda z: -z, np.array([0.0]), radii=[0.1])


# -- weighted running means ------------------------------------------------------------

def test_toeplitz_constant_sequence():
    out = toeplitz_average(np.ones(100), np.full(100, 3.25))
    assert np.all(out == 3.25)


def test_toeplitz_harmonic_decay():
    n = 10_000
    vals = 1.0 / np.arange(1, n + 1)
    out = toeplitz_average(np.ones(n), vals)
    assert out[-1] == pytest.approx(harmonic_number(n) / n, rel=1e-12)
    oracle = weighted_running_mean_loop(np.ones(n), vals)
    assert np.allclose(out, oracle, rtol=1e-12)


def test_toeplitz_sqrt_weights_converge():
    n = 10_000
    i = np.arange(1, n + 1)
    vals = 5.0 + 1.0 / np.sqrt(i)
    out = toeplitz_average(np.sqrt(i), vals)
    assert abs(out[-1] - 5.0) < 0.05


def test_toeplitz_scale_invariance_and_errors():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, 50)
    a[0] = 0.5
    v = rng.normal(size=50)
    assert np.allclose(toeplitz_average(a, v), toeplitz_average(7.0 * a, v),
                       rtol=1e-12)
    with pytest.raises(ConfigError):
        toeplitz_average(np.array([1.0, -0.1]), np.zeros(2))
    with pytest.raises(ConfigError):
        toeplitz_average(np.zeros(3), np.ones(3))
    with pytest.raises(ConfigError):
        toeplitz_average(np.ones(3), np.ones(4))


def test_log_checkpoints_cover_range():
    cps = log_checkpoints(10 ** 5)
    assert cps[0] == 1 and cps[-1] == 10 ** 5
    assert all(a < b for a, b in zip(cps, cps[1:]))
    assert log_checkpoints(3) == [1, 2, 3]
    with pytest.raises(ConfigError):
        log_checkpoints(0)
