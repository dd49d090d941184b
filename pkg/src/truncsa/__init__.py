"""Truncated stochastic approximation with moving bounds.

Root finding from noisy observations where each step is clamped to a
time-indexed convex set: expanding boxes tame drift growth, shrinking
floors/caps keep estimators inside their natural domain, and balls around an
auxiliary estimate localize the search.  On top of the core recursion sit
matrix step-size rules, recursive estimators (least squares, likelihood), a
diagnostics layer that stress-tests the convergence/rate/linearity behaviour
on simulated paths, and a CLI for reproducible Monte Carlo studies.
"""

from ._backend import BACKEND
from .errors import ConfigError, DataError, NumericError, TruncsaError
from .sa_core import (FieldModel, SaConfig, StepRecord, Trajectory,
                      make_noise_gaussian, make_noise_student_t,
                      read_trajectories, sa_run, sa_step)
from .specfun import digamma, digamma_array, trigamma, trigamma_array
from .stepsize import (FisherAccumulator, StepSizeRule, fisher_update,
                       parse_time_expression, rule_matrix,
                       rule_optimal_from_jacobian, rule_scalar)
from .truncation import (Ball, Box, TruncationSchedule, WholeSpace,
                         admissibility_probe, project, schedule_expanding,
                         schedule_fixed, schedule_from_config,
                         schedule_gamma_mt, schedule_shrinking_aux,
                         schedule_trivial)
from .estimators import (Ar1State, GammaMleState, LinearProcedure,
                         ar1_batch_estimate, ar1_init, ar1_step,
                         gamma_mle_init, gamma_mle_step, linear_step,
                         load_observations, m_estimator_step)
from .diagnostics import (DriftStrength, ExpansionFit, LinearityReport,
                          RateReport, linearity_residual, log_checkpoints,
                          probe_drift_sign, probe_drift_strength,
                          probe_local_expansion, rate_tracker, toeplitz_average)
from .experiments import (Scenario, builtin_names, builtin_scenario,
                          build_config, emit_histogram, run_replication,
                          run_scenario, scenario_from_dict, scenario_from_toml,
                          scenario_to_toml)

__version__ = "0.1.0"
