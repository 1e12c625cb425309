"""Exception types shared across the package."""


class ShuttleKitError(Exception):
    """Base class for all package errors."""


class DomainError(ShuttleKitError, ValueError):
    """An argument lies outside the domain of a function."""


class EvaluationError(ShuttleKitError, ArithmeticError):
    """An integrand produced a non-finite value."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DivergenceError(ShuttleKitError, ArithmeticError):
    """An ODE state became non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SingularMatrixError(ShuttleKitError, ArithmeticError):
    pass


class InfeasibleError(ShuttleKitError, ValueError):
    """No trajectory satisfies the requested constraints."""


class InvalidDurationError(ShuttleKitError, ValueError):
    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class ConfigurationError(ShuttleKitError, ValueError):
    pass


class UncertaintyFloorWarning(RuntimeWarning):
    """Moments fell below the Heisenberg floor.

    The memory-kernel master equation only keeps the leading correction to
    the Markovian limit; once the noise correlation time approaches the
    trap period it stops preserving positivity and its moments are not
    physical.
    """
