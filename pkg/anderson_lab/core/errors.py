"""Exception hierarchy for the lab.

Library code raises these; only ``main.py`` maps them to exit codes.
"""


class LabError(Exception):
    """Base class for every error raised by anderson_lab."""


class DomainError(LabError):
    """A value outside the domain of a numerical routine (NaN/inf, log of <= 0)."""


class OutOfResolventSetError(LabError):
    """Energy lies in the spectrum where a resolvent was requested."""


class PreconditionError(LabError):
    """An operation was called with arguments violating its precondition."""


class InadmissibleEnergyError(PreconditionError):
    """(lambda, E, eps) outside the range where a fixed point is guaranteed."""

    def __init__(self, message: str, energy: float | None = None, threshold: float | None = None):
        super().__init__(message)
        self.energy = energy
        self.threshold = threshold


class DesignGuardError(PreconditionError):
    """A desk-scale guard (box size, sample count) was exceeded without override."""


class UnsupportedVariantError(LabError):
    """Operation not defined for this single-site potential variant."""


class IncompleteSampleError(LabError):
    """A disorder sample is missing a coupling needed to evaluate the potential."""


class ConditioningError(LabError):
    """A linear system is numerically singular at the requested precision."""


class EigenvalueHitError(ConditioningError):
    """The real energy coincides with an eigenvalue of a finite Hamiltonian."""


class NonConvergenceError(LabError):
    """An iterative solver exhausted its budget."""

    def __init__(self, message: str, ratios: list[float] | None = None, residual: float | None = None):
        super().__init__(message)
        self.ratios = list(ratios or [])
        self.residual = residual


class BoundViolationError(LabError):
    """A post-solve certificate (a proven bound) failed."""


class CombinatorialGuardError(LabError):
    """Enumeration size guard exceeded."""


class DimensionMismatchError(LabError):
    """Operator blocks live on different index sets."""


class NotPositiveDefiniteError(LabError):
    """Matrix expected to be positive definite is not."""
