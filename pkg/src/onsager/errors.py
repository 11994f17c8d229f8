"""Exception classes shared across the suite."""


class OnsagerError(Exception):
    """Base class for all errors raised by this package."""


class AccuracyError(OnsagerError):
    """Quadrature could not meet the requested tolerance.

    Carries the achieved error estimate in ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ValidationError(OnsagerError):
    """Input data violates a structural invariant (e.g. kernel positivity)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SingularLinearizationError(OnsagerError):
    """Newton linearization is singular; lambda is likely at a critical value."""


class DegenerateIndexError(OnsagerError):
    """det(I - J) is too close to zero to assign a sign."""


class InconclusiveAuditError(OnsagerError):
    """Solution censuses disagree across seeds; degree audit aborted."""

    def __init__(self, message, censuses=None):
        super().__init__(message)
        self.censuses = censuses


class BranchNotFoundError(OnsagerError):
    """Continuation probes on both sides of a critical value failed."""


class MarginalStabilityError(OnsagerError):
    """Stability probe decay rate is below the decision threshold."""


class ThresholdUndefinedError(OnsagerError):
    """Coefficient sum diverges; uniqueness threshold is undefined."""


class StepSizeError(OnsagerError):
    """Requested dt exceeds the explicit stability limit."""


class DivergenceError(OnsagerError):
    """Time integration produced NaN/overflow.

    ``last_time`` holds the last valid simulation time.
    """

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time
