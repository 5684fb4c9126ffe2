"""Exception hierarchy shared by all estimators."""


class EstimationError(RuntimeError):
    """Base class for failures that make a single estimate unavailable.

    Replication drivers count these as failures instead of aborting.
    """

    code = "EstimationError"


class NonFiniteWeight(EstimationError):
    """p_u(x)/q(x) evaluated to inf or nan at a drawn point."""

    code = "NonFiniteWeight"


class SupportViolation(EstimationError):
    """A drawn point has zero proposal density."""

    code = "SupportViolation"


class ZeroWeightSum(EstimationError):
    """A ratio denominator is zero because every draw landed in a hole."""

    code = "ZeroWeightSum"


class NonExistence(EstimationError):
    """The estimating equation has no sign change (one side has no weight)."""

    code = "NonExistence"


class AtBreakpoint(ValueError):
    """Derivative requested exactly at a breakpoint without choosing a side."""


class DimensionMismatch(ValueError):
    pass


class DegenerateProblem(ValueError):
    """The integrand has zero variance under the target."""


class EmptySide(ValueError):
    """No target mass on the requested side of the centering value."""


class QuadratureFailure(RuntimeError):
    pass


class AllReplicationsFailed(RuntimeError):
    pass
