"""Exception types shared across the package."""


class SchemaError(Exception):
    """A required column is missing or unknown."""


class InsufficientDataError(Exception):
    """Too few rows to compute the requested statistic."""


class ZeroVarianceError(Exception):
    """A column has zero variance where variation is required."""

    def __init__(self, column: str, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column!r} has zero variance")


class SingularDesignError(Exception):
    """Linear-family design matrix is singular or numerically rank deficient."""

    def __init__(self, message: str, condition_number: float | None = None):
        self.condition_number = condition_number
        super().__init__(message)
