"""Exception hierarchy shared by every dlgp module."""


class DlgpError(Exception):
    """Base class for all errors raised by dlgp."""


class ConfigError(DlgpError, ValueError):
    """Inconsistent configuration: layer widths, config file keys, quantile lists."""


class InputError(DlgpError, ValueError):
    """Malformed or non-finite user data."""


class DomainError(DlgpError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NumericalError(DlgpError, ArithmeticError):
    """A factorization or iterative procedure failed numerically."""


class ResourceError(DlgpError, MemoryError):
    """A dense computation would exceed the configured size cap."""


class TrainingError(DlgpError, RuntimeError):
    """Optimisation diverged.

    Attributes
    ----------
    step : int
        Index of the gradient step at which divergence was detected.
    trace : ndarray or None
        Log-likelihoods recorded before the failure.
    """

    def __init__(self, message, step=None, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace


class FormatError(DlgpError, ValueError):
    """Unreadable or incompatible model file."""


class MetricError(DlgpError, ValueError):
    """A metric is undefined for the given inputs."""


class BenchmarkError(DlgpError, RuntimeError):
    """Too many benchmark splits failed."""


class JitterWarning(RuntimeWarning):
    """Emitted when a Cholesky factorization needed jitter above 1e-10."""
