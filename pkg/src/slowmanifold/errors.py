"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: configuration-type errors exit with 2,
numeric divergence with 3, iterative-convergence failures with 4.
"""


class SlowManifoldError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SlowManifoldError):
    """Invalid input, option, or file content supplied by the caller."""


class DomainError(SlowManifoldError):
    """An operation was asked to act outside its valid data window."""


class StiffnessError(ConfigurationError):
    """Explicit time step too large for the fast scale."""


class HypothesisViolationError(ConfigurationError):
    """A spectral hypothesis (H1/H2) required by the method fails."""


class DivergenceError(SlowManifoldError):
    """A simulated state left the finite range.

    Carries the first offending step so callers can report where the
    integration broke down.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class ConvergenceError(SlowManifoldError):
    """An iterative scheme failed to reach its residual tolerance."""


class HypothesisWarning(UserWarning):
    """Soft warning for hypothesis checks that are advisory only (H2)."""
