"""Exception hierarchy shared by all modules."""


class SubPoissonError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SubPoissonError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceError(SubPoissonError):
    """The requested problem size exceeds a configured cap."""


class ConvergenceError(SubPoissonError):
    """No plateau of the excited-state population within the horizon."""


class SolverError(SubPoissonError):
    """The ODE integrator failed (e.g. step-size underflow)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class HorizonTooShortError(SubPoissonError):
    """The ensemble mean never reached the target within the time horizon."""


class ConfigError(SubPoissonError, ValueError):
    """Malformed or inconsistent configuration document."""
