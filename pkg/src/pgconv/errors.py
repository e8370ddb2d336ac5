"""Exception hierarchy shared by every module."""


class PgconvError(Exception):
    """Base class for all library errors."""


class DimensionError(PgconvError, ValueError):
    pass


class DomainError(PgconvError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class ConfigError(PgconvError, ValueError):
    """Hyperparameters violate a method's preconditions."""


class NumericError(PgconvError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class StabilityError(NumericError):
    """Closed-loop matrix is not Schur stable."""

    def __init__(self, message, spectral_radius=None):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class ConvergenceError(PgconvError, RuntimeError):
    def __init__(self, message, final_error=None):
        super().__init__(message)
        self.final_error = final_error


class ReducibilityError(ConvergenceError):
    pass


class StabilizabilityError(ConvergenceError):
    pass
