"""Exception types shared across the package."""


class TruncsaError(Exception):
    """Base class for all package errors."""


class ConfigError(TruncsaError, ValueError):
    """Invalid configuration: bad parameters, degenerate sets, malformed TOML."""


class DataError(TruncsaError, ValueError):
    """Invalid observation fed to an estimator (e.g. non-positive Gamma draw)."""


class NumericError(TruncsaError, RuntimeError):
    """Numerical failure during a run: non-finite proposal, singular step matrix.

    Carries the failing step index so a blow-up can be located; ``state`` is
    the iterate the failing step started from, when known.
    """

    def __init__(self, message, t=None, state=None):
        if t is not None:
            message = f"step {t}: {message}"
        super().__init__(message)
        self.t = t
        self.state = state
