"""Estimation failure types shared across the fitting modules."""


class EstimationError(RuntimeError):
    """Base class for estimator failures (bench replicates discard on these)."""


class InsufficientFailures(EstimationError):
    """Fewer observed failures than the estimator can support."""


class NonConvergence(EstimationError):
    """Iteration budget exhausted before the stopping rule fired."""


class DivergentIterate(EstimationError):
    """An iterate left the admissible parameter region."""


class SingularInformation(EstimationError):
    """Observed information too close to singular to invert."""


class HessianNotNegativeDefinite(EstimationError):
    """A maximizer's Hessian failed the negative-definiteness check."""


class EmptyChain(EstimationError):
    """A posterior functional was requested from an empty draw set."""
