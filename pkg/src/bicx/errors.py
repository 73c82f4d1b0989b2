"""Exception types shared across modules."""


class BicxError(Exception):
    """Base class for package errors."""


class PreconditionError(BicxError, ValueError):
    """An operation was called outside the regime its guarantee covers."""


class DegeneratePosterior(BicxError):
    """Every particle weight vanished after conditioning."""


class TiltInfeasible(BicxError):
    """No tilt with the requested lower bound cancels the first moment.

    ``direction`` is a unit vector along which the sample mass is (nearly)
    one-sided, i.e. a witness that the positivity condition fails.
    """

    def __init__(self, message, direction=None, residual=None):
        super().__init__(message)
        self.direction = direction
        self.residual = residual


class BudgetExceeded(BicxError):
    """The step budget ran out before the spectral certificate was reached."""


class ConfigError(BicxError, ValueError):
    """A run configuration is malformed or internally inconsistent."""
