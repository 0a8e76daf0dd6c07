"""Exception types shared across the package."""


class OnlineLaplaceError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(OnlineLaplaceError, ValueError):
    pass


class NotPositiveDefinite(OnlineLaplaceError, ArithmeticError):
    """Raised when a Cholesky pivot stays non-positive after every jitter level."""


class DegenerateNorm(OnlineLaplaceError, ArithmeticError):
    """A squared norm fell below the floor used by the MacKay update."""


class NumericalBreakdown(OnlineLaplaceError, ArithmeticError):
    """Training produced a non-finite loss.

    Carries the step index and the last parameters/hyperparameters that were
    still finite so callers can inspect or resume.
    """

    def __init__(self, message, step=None, params=None, hyper=None):
        super().__init__(message)
        self.step = step
        self.params = params
        self.hyper = hyper


class ParseError(OnlineLaplaceError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingValue(ParseError):
    pass


class TooFewRows(OnlineLaplaceError, ValueError):
    pass


class MissingArtifacts(OnlineLaplaceError, FileNotFoundError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing run artifacts: " + ", ".join(map(str, self.missing)))
