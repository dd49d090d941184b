"""Digamma and trigamma kernels for the Gamma-shape score and information.

Both functions shift the argument above 6 by the exact recurrences

    psi(x)  = psi(x + 1) - 1/x          psi'(x) = psi'(x + 1) + 1/x^2

and then evaluate the asymptotic expansion with Bernoulli terms through B12.
The heavy lifting lives in the kernel backend (compiled when available).
"""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DataError


@dataclass(frozen=True)
class SpecFunResult:
    """A function value together with a bound on the method's truncation error.

    ``est_abs_error`` bounds the series-truncation error of the asymptotic
    tail (the recurrence shifts are exact); final rounding at machine
    precision is not included.
    """

    value: float
    est_abs_error: float


def _check_domain(name, x):
    if not x > 0.0:
        raise DataError(f"{name} requires x > 0, got {x!r}")


def digamma(x: float) -> float:
    """First logarithmic derivative of the Gamma function, x > 0."""
    _check_domain("digamma", float(x))
    return kernels.digamma(float(x))


def trigamma(x: float) -> float:
    """Second logarithmic derivative of the Gamma function, x > 0."""
    _check_domain("trigamma", float(x))
    return kernels.trigamma(float(x))


def digamma_array(x) -> np.ndarray:
    """Elementwise digamma of a positive 1-D array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size and not (x > 0.0).all():
        raise DataError("digamma requires all arguments > 0")
    out = np.empty_like(x)
    kernels.digamma_array(x, out)
    return out


def trigamma_array(x) -> np.ndarray:
    """Elementwise trigamma of a positive 1-D array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size and not (x > 0.0).all():
        raise DataError("trigamma requires all arguments > 0")
    out = np.empty_like(x)
    kernels.trigamma_array(x, out)
    return out


# After shifting to xs >= 6 the first omitted tail terms are
# B14/(14*xs^14) for psi and B14/xs^15 for psi'; B14 = 7/6.  Bounding xs by 6
# from below gives conservative constants.
_DG_TRUNC_BOUND = (7.0 / 6.0) / 14.0 / 6.0**14
_TG_TRUNC_BOUND = (7.0 / 6.0) / 6.0**15


def digamma_with_error(x: float) -> SpecFunResult:
    return SpecFunResult(digamma(x), _DG_TRUNC_BOUND)


def trigamma_with_error(x: float) -> SpecFunResult:
    return SpecFunResult(trigamma(x), _TG_TRUNC_BOUND)
