"""Command-line harness.

    truncsa run <scenario.toml> [--seed N] [--jobs K] [--out DIR]
    truncsa builtin <name> [--override key=val ...] [--seed N] [--jobs K] [--out DIR]
    truncsa diag linearity|rate|probe <traj.csv> <model.toml> [options]

Seed precedence: --seed, then the TRUNCSA_SEED environment variable, then the
scenario's own seed field.  Exit codes: 0 success, 2 configuration error,
3 runtime numeric failure.
"""

import json
import math
import os
import sys

import click
import numpy as np

from . import experiments
from ._backend import BACKEND
from .diagnostics import (linearity_residual, log_checkpoints,
                          probe_drift_sign, probe_drift_strength, rate_tracker)
from .errors import ConfigError, DataError, NumericError
from .sa_core import read_trajectories
from .stepsize import parse_time_expression
from .tomlio import load_toml
from .truncation import Box, WholeSpace, schedule_from_config


def _resolve_seed(cli_seed, scenario_seed):
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("TRUNCSA_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"TRUNCSA_SEED must be an integer, got {env!r}") from None
    return int(scenario_seed)


@click.group()
@click.version_option(package_name="truncsa")
def cli():
    """Truncated stochastic-approximation simulation harness."""


@cli.command()
@click.argument("scenario_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Base seed; replication r uses seed+r.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Concurrent replications.")
@click.option("--out", "out_dir", type=click.Path(), default=".", show_default=True,
              help="Output directory.")
def run(scenario_path, seed, jobs, out_dir):
    """Run a scenario TOML file."""
    sc = experiments.scenario_from_toml(scenario_path)
    summary = experiments.run_scenario(sc, base_seed=_resolve_seed(seed, sc.seed),
                                       out_dir=out_dir, jobs=jobs)
    click.echo(f"[{BACKEND}] {sc.name}: {summary['runs']} runs, "
               f"mean {summary['mean']:.6g}, wrote {summary['summary_path']}")


@cli.command()
@click.argument("name")
@click.option("--override", "-O", "overrides", multiple=True, metavar="KEY=VAL",
              help="Dotted override, e.g. model.theta=0.5 or horizon=1000.")
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=".", show_default=True)
def builtin(name, overrides, seed, jobs, out_dir):
    """Run a bundled scenario: poly, gamma_mt, gamma_ft, ar1, or linear."""
    sc = experiments.builtin_scenario(name)
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override must look like key=value, got {ov!r}")
        key, val = ov.split("=", 1)
        sc = experiments.apply_override(sc, key.strip(), val.strip())
    summary = experiments.run_scenario(sc, base_seed=_resolve_seed(seed, sc.seed),
                                       out_dir=out_dir, jobs=jobs)
    click.echo(f"[{BACKEND}] {sc.name}: {summary['runs']} runs, "
               f"mean {summary['mean']:.6g}, wrote {summary['summary_path']}")


def _model_spec(path):
    """A scenario-shaped TOML with run fields defaulted, for diag commands."""
    data = load_toml(path)
    data.setdefault("name", "model")
    data.setdefault("horizon", 1)
    data.setdefault("replications", 1)
    return experiments.scenario_from_dict(data)


def _root_and_rates(sc):
    """(root, gamma_at_root, norming_sqrt_a) for trajectory-file diagnostics."""
    if sc.kind in ("poly", "linear"):
        root = float(sc.model["z0"])
        a_fn = parse_time_expression(sc.step.get("a", "t"))
    elif sc.kind == "gamma":
        root = float(sc.model["theta"])
        a_fn = lambda t: float(t)
    else:
        raise ConfigError(
            f"diagnostics from a trajectory file support poly/linear/gamma, not {sc.kind!r}")
    return root, (lambda t: 1.0 / a_fn(t)), (lambda t: math.sqrt(a_fn(t)))


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("mode", type=click.Choice(["linearity", "rate", "probe"]))
@click.argument("traj_csv", type=click.Path(exists=True))
@click.argument("model_toml", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Write JSON here instead of stdout.")
@click.option("--delta", type=float, default=0.9, show_default=True,
              help="Rate exponent for `rate`.")
@click.option("--eps", type=float, default=0.1, show_default=True,
              help="Annulus parameter for `probe`.")
@click.option("--at-step", "t_index", type=int, default=None,
              help="Step index for `probe` (default: last row of the trajectory).")
@click.option("--grid-points", type=int, default=1001, show_default=True)
@click.option("--rep", type=int, default=None,
              help="Replication to analyze when the CSV holds several (default: first).")
def diag(mode, traj_csv, model_toml, out, delta, eps, t_index, grid_points, rep):
    """Diagnostics over a saved trajectory CSV given its model description."""
    sc = _model_spec(model_toml)
    trajs = read_trajectories(traj_csv)
    if rep is None:
        traj = trajs[0]
    else:
        matches = [t for t in trajs if t.rep == rep]
        if not matches:
            raise ConfigError(f"no replication {rep} in {traj_csv}")
        traj = matches[0]
    if mode == "probe":
        _diag_probe(sc, traj, out, eps, t_index, grid_points)
        return
    root, gamma_root, norming = _root_and_rates(sc)
    checkpoints = sc.checkpoints or log_checkpoints(traj.horizon)
    checkpoints = [t for t in checkpoints if t <= traj.horizon]
    if mode == "linearity":
        report = linearity_residual(
            traj, experiments._RootOnly(root),
            lambda t: np.array([[gamma_root(t)]]),
            lambda t: np.array([[norming(t)]]),
            checkpoints=checkpoints)
        _emit(report.to_dict(), out)
    else:
        a_fn = parse_time_expression(sc.step.get("a", "t")) if sc.kind != "gamma" \
            else (lambda t: float(t))
        report = rate_tracker(traj, np.array([root]), a_fn, delta,
                              checkpoints=checkpoints)
        _emit(report.to_dict(), out)


def _diag_probe(sc, traj, out, eps, t_index, grid_points):
    if sc.kind == "gamma":
        field = experiments._gamma_field(sc.model, np.zeros(1))
    elif sc.kind in ("poly", "linear"):
        model = dict(sc.model)
        if sc.kind == "linear":
            model["coeffs"] = [1.0]
        field = experiments._poly_field(model)
    else:
        raise ConfigError(f"probe supports poly/linear/gamma models, not {sc.kind!r}")
    t = int(t_index) if t_index is not None else traj.horizon
    schedule = schedule_from_config(sc.truncation)
    uset = schedule(max(1, t - 1))
    root = float(field.root[0])
    if isinstance(uset, Box):
        lo, hi = float(uset.lower[0]), float(uset.upper[0])
    elif isinstance(uset, WholeSpace):
        lo, hi = root - 1.0 / eps, root + 1.0 / eps
    else:
        raise ConfigError("probe grids are built for box or unbounded schedules")
    grid = np.linspace(lo, hi, grid_points)
    sign_max = probe_drift_sign(field, field.root, t, grid)
    try:
        strength = probe_drift_strength(field, field.root, t, eps, grid, u_set=uset)
        strength_out = {"value": strength.value, "empty": strength.empty}
    except ConfigError as exc:
        strength_out = {"error": str(exc)}
    _emit({
        "t": t,
        "eps": eps,
        "set": {"lower": lo, "upper": hi} if isinstance(uset, Box) else "whole-space",
        "drift_sign_max": sign_max,
        "drift_sign_pass": bool(sign_max <= 0.0),
        "drift_strength": strength_out,
    }, out)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 2
    except (ConfigError, DataError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except NumericError as exc:
        click.echo(f"numeric error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
