"""Core recursion engine: one clamped root-finding step at a time.

The iterate moves by a step matrix times (drift + noise) and is then projected
onto the step's truncation set.  Everything the diagnostics layer needs is
recorded: proposals, noise draws, paired draws at the root, clamp flags, and
the step matrices actually used.
"""

import io
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NumericError
from .truncation import TruncationSchedule, project

__all__ = [
    "FieldModel", "SaConfig", "StepRecord", "Trajectory", "History",
    "sa_step", "sa_run", "read_trajectories",
    "make_noise_gaussian", "make_noise_student_t", "as_state",
]


def as_state(x, dim=None):
    """Validate and normalize a point to a finite float64 vector."""
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if v.ndim != 1:
        raise ConfigError(f"state must be a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ConfigError(f"state has dimension {v.shape[0]}, expected {dim}")
    if not np.isfinite(v).all():
        raise ConfigError(f"state must be finite, got {v}")
    return v


class History:
    """Append-only view of the trajectory built so far.

    ``steps`` is the number of completed steps; ``iterates`` are the iterates
    after steps 1..steps.  Drift and schedule callables receive this handle;
    state-free models simply ignore it.
    """

    def __init__(self, initial, z_store):
        self.initial = initial
        self._z = z_store
        self.steps = 0

    @property
    def iterates(self):
        return self._z[: self.steps]

    def last(self):
        return self._z[self.steps - 1] if self.steps else self.initial


@dataclass(frozen=True)
class FieldModel:
    """Drift/noise pair sharing a common root.

    ``regression(t, z, history)`` is the mean drift at z before step t's
    observation arrives; it vanishes at ``root``.  ``noise(t, z, rng)``
    produces one zero-mean disturbance at z.

    ``noise_kind`` declares how paired draws at the root are produced:
      * "state_free"    -- noise ignores z; the paired draw is the same value.
      * "deterministic" -- noise is a pure function of (t, z) (randomness was
                           bound at construction, e.g. pre-drawn observations);
                           the paired draw re-evaluates at the root.
      * "replay"        -- generic case: the generator state is snapshotted so
                           both evaluations consume the same underlying
                           uniforms, then the stream continues after the
                           primary draw.
    ``noise_batch(rng, horizon)``, when given, pre-draws all noise for a run
    as a (horizon, m) array; it implies state-free noise and is the fast path.
    """

    root: np.ndarray
    regression: Callable
    noise: Callable
    regression_jacobian: Optional[Callable] = None
    noise_kind: str = "replay"
    noise_batch: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "root", as_state(self.root))
        if self.noise_kind not in ("state_free", "deterministic", "replay"):
            raise ConfigError(f"unknown noise_kind {self.noise_kind!r}")


@dataclass(frozen=True)
class SaConfig:
    initial: np.ndarray
    step_rule: object
    truncation: TruncationSchedule
    field: FieldModel
    horizon: int
    seed: int
    record_root_noise: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "initial", as_state(self.initial))
        if int(self.horizon) < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        if self.initial.shape != self.field.root.shape:
            raise ConfigError("initial point and field root have different dimensions")

    @property
    def dim(self):
        return self.initial.shape[0]

    def pair_root_draws(self):
        if self.record_root_noise is None:
            return self.dim <= 8
        return bool(self.record_root_noise)


@dataclass(frozen=True)
class StepRecord:
    t: int
    proposed: np.ndarray
    iterate: np.ndarray
    eps: np.ndarray
    eps_root: Optional[np.ndarray]
    truncated: bool
    gamma: np.ndarray


@dataclass
class Trajectory:
    """Full record of one run; arrays are indexed by step-1 for t = 1..T."""

    z: np.ndarray                      # (T, m) iterates
    proposed: np.ndarray               # (T, m) pre-projection points
    eps: np.ndarray                    # (T, m) noise at the pre-step iterate
    truncated: np.ndarray              # (T,) bool
    eps_root: Optional[np.ndarray] = None   # (T, m) paired draws at the root
    gamma: Optional[np.ndarray] = None      # (T, m, m) step matrices
    initial: Optional[np.ndarray] = None
    seed: Optional[int] = None
    rep: int = 0

    @property
    def horizon(self):
        return self.z.shape[0]

    @property
    def dim(self):
        return self.z.shape[1]

    @property
    def final(self):
        return self.z[-1]

    def to_csv(self, path_or_file):
        """Serialize in the interchange layout (17 significant digits)."""
        m = self.dim
        cols = ["t", "rep", "truncated"]
        cols += [f"z_{j}" for j in range(1, m + 1)]
        cols += [f"prop_{j}" for j in range(1, m + 1)]
        cols += [f"eps_{j}" for j in range(1, m + 1)]
        with_root = self.eps_root is not None
        if with_root:
            cols += [f"eps0_{j}" for j in range(1, m + 1)]
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            fh.write(",".join(cols) + "\n")
            for i in range(self.horizon):
                row = [str(i + 1), str(self.rep), "1" if self.truncated[i] else "0"]
                row += [f"{v:.17g}" for v in self.z[i]]
                row += [f"{v:.17g}" for v in self.proposed[i]]
                row += [f"{v:.17g}" for v in self.eps[i]]
                if with_root:
                    row += [f"{v:.17g}" for v in self.eps_root[i]]
                fh.write(",".join(row) + "\n")
        finally:
            if own:
                fh.close()

    def to_csv_string(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path_or_file, rep=None):
        """Read one trajectory; pick ``rep`` when the file holds several."""
        trajs = read_trajectories(path_or_file)
        if rep is None:
            if len(trajs) > 1:
                raise ConfigError(
                    f"file holds {len(trajs)} replications; pass rep= or use "
                    "read_trajectories()")
            return trajs[0]
        for t in trajs:
            if t.rep == rep:
                return t
        raise ConfigError(f"no replication {rep} in file")


def read_trajectories(path_or_file):
    """Parse a trajectory CSV into one Trajectory per replication block."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r", newline="") if own else path_or_file
    try:
        header = fh.readline().strip().split(",")
        zcols = [c for c in header if c.startswith("z_")]
        m = len(zcols)
        expected = ["t", "rep", "truncated"] + [f"z_{j}" for j in range(1, m + 1)] \
            + [f"prop_{j}" for j in range(1, m + 1)] + [f"eps_{j}" for j in range(1, m + 1)]
        with_root = len(header) == len(expected) + m
        if with_root:
            expected += [f"eps0_{j}" for j in range(1, m + 1)]
        if header != expected:
            raise ConfigError(f"unrecognized trajectory header: {header}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    finally:
        if own:
            fh.close()
    blocks = []
    start = 0
    for i, row in enumerate(rows):
        if int(row[0]) == 1 and i > start:
            blocks.append(rows[start:i])
            start = i
    blocks.append(rows[start:])

    out = []
    for block in blocks:
        T = len(block)
        z = np.empty((T, m))
        prop = np.empty((T, m))
        eps = np.empty((T, m))
        eps0 = np.empty((T, m)) if with_root else None
        trunc = np.empty(T, dtype=bool)
        rep = 0
        for i, row in enumerate(block):
            if int(row[0]) != i + 1:
                raise ConfigError(f"trajectory steps out of order near t={row[0]}")
            rep = int(row[1])
            trunc[i] = row[2] == "1"
            vals = [float(v) for v in row[3:]]
            z[i] = vals[0:m]
            prop[i] = vals[m:2 * m]
            eps[i] = vals[2 * m:3 * m]
            if with_root:
                eps0[i] = vals[3 * m:4 * m]
        out.append(Trajectory(z=z, proposed=prop, eps=eps, truncated=trunc,
                              eps_root=eps0, rep=rep))
    return out


def make_noise_gaussian(sigma):
    """State-free Gaussian noise with standard deviation sigma."""
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ConfigError(f"sigma must be positive, got {sigma}")

    def noise(t, z, rng):
        return sigma * rng.standard_normal(np.asarray(z).shape[0])

    def batch(rng, horizon, dim=1):
        return sigma * rng.standard_normal((horizon, dim))

    noise.batch = batch
    noise.kind = "gaussian"
    noise.params = {"sigma": sigma}
    return noise


def make_noise_student_t(df):
    """State-free Student-t noise: a standard normal scaled by the square
    root of an independent chi-square over its degrees of freedom, both taken
    from the caller's stream (normals first, then the chi-squares)."""
    df = float(df)
    if not df > 0.0:
        raise ConfigError(f"degrees of freedom must be positive, got {df}")

    def noise(t, z, rng):
        dim = np.asarray(z).shape[0]
        g = rng.standard_normal(dim)
        w = rng.chisquare(df, dim)
        return g / np.sqrt(w / df)

    def batch(rng, horizon, dim=1):
        g = rng.standard_normal((horizon, dim))
        w = rng.chisquare(df, (horizon, dim))
        return g / np.sqrt(w / df)

    noise.batch = batch
    noise.kind = "student_t"
    noise.params = {"df": df}
    return noise


def _draw_pair(field, t, z, rng, want_root):
    """One noise draw at z plus, if requested, the paired draw at the root
    produced from the same underlying randomness."""
    if field.noise_kind == "state_free":
        eps = np.asarray(field.noise(t, z, rng), dtype=np.float64)
        return eps, (eps if want_root else None)
    if field.noise_kind == "deterministic":
        eps = np.asarray(field.noise(t, z, None), dtype=np.float64)
        eps0 = np.asarray(field.noise(t, field.root, None), dtype=np.float64) if want_root else None
        return eps, eps0
    before = rng.bit_generator.state
    eps = np.asarray(field.noise(t, z, rng), dtype=np.float64)
    if not want_root:
        return eps, None
    after = rng.bit_generator.state
    rng.bit_generator.state = before
    eps0 = np.asarray(field.noise(t, field.root, rng), dtype=np.float64)
    rng.bit_generator.state = after
    return eps, eps0


def _one_step(z, t, field, gamma_eval, schedule, history, rng, want_root, pre_eps=None):
    gamma = np.asarray(gamma_eval(t, z, history), dtype=np.float64)
    m = z.shape[0]
    if gamma.shape != (m, m):
        raise ConfigError(f"step matrix at t={t} has shape {gamma.shape}, expected {(m, m)}")
    if not np.isfinite(gamma).all():
        raise NumericError("non-finite step matrix", t=t, state=z)
    r = np.asarray(field.regression(t, z, history), dtype=np.float64)
    if pre_eps is not None:
        eps = pre_eps
        eps0 = eps if want_root else None
    else:
        eps, eps0 = _draw_pair(field, t, z, rng, want_root)
    proposed = z + gamma @ (r + eps)
    if not np.isfinite(proposed).all():
        raise NumericError(f"non-finite proposal from state {z}", t=t, state=z)
    uset = schedule(t, history)
    iterate = project(uset, proposed)
    truncated = bool(np.any(iterate != proposed))
    return StepRecord(t=t, proposed=proposed, iterate=iterate, eps=eps,
                      eps_root=eps0, truncated=truncated, gamma=gamma)


def sa_step(state, t, config, rng, history=None, gamma_eval=None):
    """Execute a single step from ``state`` at index t >= 1.

    Returns (new_state, StepRecord).  For rules with per-run state pass the
    evaluator from ``config.step_rule.for_run()``; by default a fresh one is
    created, which is fine for stateless rules.
    """
    if t < 1:
        raise ConfigError(f"step index must be >= 1, got {t}")
    z = as_state(state, dim=config.dim)
    if gamma_eval is None:
        gamma_eval = config.step_rule.for_run()
    rec = _one_step(z, t, config.field, gamma_eval, config.truncation, history,
                    rng, config.pair_root_draws())
    return rec.iterate, rec


def sa_run(config):
    """Run the full recursion; the result is a deterministic function of
    (config, seed)."""
    T = config.horizon
    field = config.field
    z = config.initial.copy()
    m = z.shape[0]
    rng = np.random.default_rng(config.seed)
    want_root = config.pair_root_draws()

    z_store = np.empty((T, m))
    prop_store = np.empty((T, m))
    eps_store = np.empty((T, m))
    eps0_store = np.empty((T, m)) if want_root else None
    trunc_store = np.zeros(T, dtype=bool)
    gamma_store = np.empty((T, m, m))

    pre = None
    if field.noise_batch is not None:
        pre = np.asarray(field.noise_batch(rng, T), dtype=np.float64)
        if pre.shape != (T, m):
            raise ConfigError(f"noise_batch returned shape {pre.shape}, expected {(T, m)}")

    gamma_eval = config.step_rule.for_run()
    history = History(config.initial, z_store)
    for t in range(1, T + 1):
        rec = _one_step(z, t, field, gamma_eval, config.truncation, history,
                        rng, want_root, pre_eps=None if pre is None else pre[t - 1])
        i = t - 1
        z_store[i] = rec.iterate
        prop_store[i] = rec.proposed
        eps_store[i] = rec.eps
        if want_root:
            eps0_store[i] = rec.eps_root
        trunc_store[i] = rec.truncated
        gamma_store[i] = rec.gamma
        z = rec.iterate
        history.steps = t
    return Trajectory(z=z_store, proposed=prop_store, eps=eps_store,
                      truncated=trunc_store, eps_root=eps0_store,
                      gamma=gamma_store, initial=config.initial,
                      seed=config.seed, rep=0)
