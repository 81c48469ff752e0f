"""
Exceptions shared by every app.

The CLI maps ConfigurationError to exit code 1 and SolverError /
EstimationError to exit code 2.
"""


class IncidenceError(Exception):
    """Base class for all project errors."""


class DomainError(IncidenceError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(IncidenceError, ValueError):
    """Invalid or unknown configuration value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class SolverError(IncidenceError, RuntimeError):
    """A root find or fixed point did not produce a solution."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()) if k != "trace")
        return f"{base} ({details})" if details else base


class EstimationError(IncidenceError, RuntimeError):
    """An estimator cannot produce coefficients on the given data."""


class InferenceError(EstimationError):
    """Coefficients exist but the requested inference does not (e.g. G < 2)."""


class AbsorptionError(EstimationError):
    """Alternating projections did not converge."""

    def __init__(self, message, column=None, sweeps=None):
        super().__init__(message)
        self.column = column
        self.sweeps = sweeps
