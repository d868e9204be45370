"""Exception hierarchy shared by all modules."""


class WaveguideError(Exception):
    """Base class for every error raised by :mod:`waveguide_pml`."""


class InvalidCrossSectionError(WaveguideError, ValueError):
    pass


class ThresholdError(WaveguideError, ValueError):
    """The spectral parameter sits on (or too close to) a cross-section eigenvalue."""


class InsufficientModesError(WaveguideError):
    pass


class DomainError(WaveguideError, ValueError):
    """Complex axial coordinate outside the analyticity sector of a metric preset."""


class DegeneracyError(WaveguideError, ArithmeticError):
    pass


class LambdaError(WaveguideError, ValueError):
    pass


class PreconditionError(WaveguideError, ValueError):
    pass


class ResourceError(WaveguideError):
    pass


class SolverError(WaveguideError):
    """Raised when a linear solve misses its residual contract.

    The achieved relative residual is kept on ``residual``.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class RefinementError(WaveguideError):
    pass


class StationError(WaveguideError, ValueError):
    pass


class FitError(WaveguideError):
    """Too few usable rows to fit an exponential rate."""


class ConfigError(WaveguideError):
    """Configuration problems; ``violations`` lists every ``section.key`` message."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
