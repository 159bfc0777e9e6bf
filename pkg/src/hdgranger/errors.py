"""Exception types shared across the package."""


class HdGrangerError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(HdGrangerError, ValueError):
    """A size precondition is violated (too few rows, lag order too large, ...)."""


class StructureError(HdGrangerError, ValueError):
    """A block structure, column map or input file is malformed."""


class ScaleError(HdGrangerError, ValueError):
    """A column has zero variance where a scale is required."""


class DegeneratePanelError(HdGrangerError, ValueError):
    """The predictor panel cannot support a factor decomposition."""


class NotComputableError(HdGrangerError):
    """The requested estimator does not exist in this regime.

    Raised when ordinary least squares (and anything built on it, such as
    the classical Wald test) is asked for with more coefficients than
    observations or with a rank-deficient design.  Callers that produce
    tables catch this and report the cell as "NA" rather than failing.
    """
