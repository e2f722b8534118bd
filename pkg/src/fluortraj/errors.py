"""Exception types shared across the package."""


class FluortrajError(Exception):
    """Base class for all package errors."""


class ConfigError(FluortrajError):
    """Invalid or inconsistent measurement/run configuration."""


class InvalidStateError(FluortrajError):
    """A density matrix or Bloch vector violates its validity contract."""


class ImpossibleOutcomeError(FluortrajError):
    """A conditional update was requested for a probability-zero outcome."""


class IntegrationError(FluortrajError):
    """Numerical integration failed (NaN, divergence, or ball exit).

    ``step`` holds the step index at which the failure was detected,
    when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BlowUpError(IntegrationError):
    """A Hamiltonian flow diverged; ``time`` records when."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class OffEllipseError(FluortrajError):
    """State lies outside the reachable ellipse domain at the given time."""


class GridMismatchError(FluortrajError):
    """Trajectories do not share a common time grid."""


class EmptySubsetError(FluortrajError):
    """An operation received an empty trajectory subset."""
