"""Exception hierarchy shared by the library and the command line."""


class SharpFrontError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class HypothesisViolation(SharpFrontError):
    """The reaction term or the initial data fail a structural hypothesis."""

    exit_code = 2


class ConvergenceError(SharpFrontError):
    """Bisection, bracketing or front location did not succeed."""

    exit_code = 3


class ConfigError(SharpFrontError):
    """Invalid run configuration or numerically absurd scheme parameters."""

    exit_code = 4

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]
