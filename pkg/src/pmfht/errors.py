"""Exception hierarchy.

Validation errors signal bad input (CLI exit code 1); numeric errors signal
a computation that could not be completed (CLI exit code 2).
"""


class PMFHTError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PMFHTError, ValueError):
    pass


class NumericError(PMFHTError, ArithmeticError):
    pass


class DimensionMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class EmptyCube(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedFormat(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class DegenerateNeighborhood(NumericError):
    def __init__(self, index, reason="collinear or coincident neighborhood"):
        self.index = index
        super().__init__(f"point {index}: {reason}")


class NonPositiveArea(NumericError):
    def __init__(self, index, area):
        self.index = index
        self.area = area
        super().__init__(f"point {index}: Voronoi area {area!r} is not positive")


class EigensolveFailure(NumericError):
    pass


class NotOrthogonal(NumericError):
    pass


class RankDeficient(NumericError):
    pass


class ChaosDiverged(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class IoError(PMFHTError, OSError):
    """A file could not be read or written."""
