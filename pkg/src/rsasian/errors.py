"""Exception hierarchy shared by every module."""


class RsAsianError(Exception):
    """Base class for all package errors."""


class ModelError(RsAsianError, ValueError):
    """A market model violates a generator or coefficient condition."""

    condition = "InvalidModel"

    def __init__(self, message: str):
        super().__init__(f"{self.condition}: {message}")


class NegativeOffDiagonal(ModelError):
    condition = "NegativeOffDiagonal"


class RowSumNonZero(ModelError):
    condition = "RowSumNonZero"


class NonPositiveVolatility(ModelError):
    condition = "NonPositiveVolatility"


class NonPositiveRate(ModelError):
    condition = "NonPositiveRate"


class SpecError(RsAsianError, ValueError):
    """An option specification is inconsistent or unsupported."""


class ConfigError(RsAsianError, ValueError):
    """A run configuration file cannot be parsed or validated."""


class NumericalError(RsAsianError, RuntimeError):
    """Base for failures of the numerical machinery (exit code 1)."""


class AccuracyError(NumericalError):
    """A quadrature self-check failed at the configured tolerance."""


class MaxIterations(NumericalError):
    """Successive approximations did not reach the stopping tolerance."""
