"""Exception hierarchy shared across the package."""


class RidgeDebiasError(Exception):
    """Base class for all errors raised by ridgedebias."""


class DataError(RidgeDebiasError, ValueError):
    """Malformed or inconsistent input data (CSV content, shapes, non-finite values)."""


class ModelError(RidgeDebiasError, ValueError):
    """A numerically or statistically invalid request, e.g. a rank-zero design."""


class NonEstimableContrast(ModelError):
    """The contrast has zero variance: it is orthogonal to the estimable span of X."""


class StudyError(RidgeDebiasError, RuntimeError):
    """A Monte Carlo replication produced a result violating a numeric invariant."""

    def __init__(self, replication: int, estimator: str, message: str):
        self.replication = replication
        self.estimator = estimator
        super().__init__(f"replication {replication}, estimator {estimator!r}: {message}")
