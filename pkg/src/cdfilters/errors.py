"""Exception hierarchy shared by the numerics, filters and harness."""


class EstimationError(Exception):
    """Base class for all errors raised by :mod:`cdfilters`."""


class DimensionError(EstimationError, ValueError):
    pass


class ContractError(EstimationError, ValueError):
    """An input violates a documented precondition."""


class FactorizationError(EstimationError):
    """Cholesky factorization failed even after jitter escalation.

    ``pivot`` is the 1-based index of the leading minor that is not
    positive definite, as reported by LAPACK ``potrf``.
    """

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix not positive definite (pivot {pivot})")


class IntegrationError(EstimationError):
    """A non-finite state appeared during fixed-step integration."""

    def __init__(self, step, member=None, message=None):
        self.step = step
        self.member = member
        if message is None:
            message = f"non-finite state at integration step {step}"
            if member is not None:
                message += f" (member {member})"
        super().__init__(message)


class EvaluationError(EstimationError):
    """A user-supplied function returned non-finite values."""


class CovarianceError(EstimationError):
    """A propagated covariance is not positive semi-definite within tolerance."""


class SingularInnovationError(EstimationError):
    """The innovation covariance could not be inverted."""


class DegenerateWeightsError(EstimationError):
    """All particle likelihoods vanished."""


class UndefinedMapeError(EstimationError, ZeroDivisionError):
    """A reference value used as MAPE denominator is exactly zero."""


class ConfigError(EstimationError, ValueError):
    pass
