"""Exception types raised across the package."""


class FouGmmError(Exception):
    """Base class for all package errors."""


class DomainError(FouGmmError, ValueError):
    """Argument outside the domain of a numeric function or model."""


class RankDeficient(FouGmmError):
    """The moment-condition matrix B does not have the required rank."""

    def __init__(self, rank, required, message=None):
        self.rank = rank
        self.required = required
        super().__init__(message or f"rank(B) = {rank} < {required} required")


class NonConvergentTail(FouGmmError):
    """A lag sum (e.g. for the long-run covariance) did not settle within its budget."""


class IntegrationError(FouGmmError):
    """Numerical quadrature failed to reach the requested tolerance."""


class NotPositiveDefinite(FouGmmError):
    """Covariance matrix could not be Cholesky factorized."""

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"covariance matrix not positive definite (pivot {pivot})")


class NonConvergence(FouGmmError):
    """Optimizer stopped before meeting its convergence criteria."""
