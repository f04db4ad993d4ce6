"""Exception types raised across qcurv."""


class QcurvError(Exception):
    """Base class for all library errors."""


class InvalidParameter(QcurvError, ValueError):
    pass


class AntipodalPole(QcurvError, ValueError):
    """The point has no finite image in the requested stereographic chart."""


class GridTooSmall(QcurvError, ValueError):
    pass


class UnsupportedDimension(QcurvError, ValueError):
    pass


class NonpositiveCurvature(QcurvError, ValueError):
    pass


class SingularPoint(QcurvError, ValueError):
    pass


class NonpositiveIterate(QcurvError):
    """An iterate (or a field that must be positive) became nonpositive."""


class NewtonFailed(QcurvError):
    pass


class SingularJacobian(QcurvError):
    pass


class RadiusOutOfChart(QcurvError, ValueError):
    pass


class FitDiverged(QcurvError):
    pass


class NonpositiveField(QcurvError, ValueError):
    pass


class AnnulusInsideCore(QcurvError, ValueError):
    pass


class InsufficientPath(QcurvError, ValueError):
    pass


class DimensionMismatch(QcurvError, ValueError):
    pass


class DegenerateCritical(QcurvError):
    """A critical point with a (numerically) singular Hessian."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points if points is not None else []


class CoincidentPoints(QcurvError, ValueError):
    pass


class RhoZero(QcurvError):
    pass


class TooManyPlusPoints(QcurvError, ValueError):
    pass


class ZeroOnBoundary(QcurvError):
    pass


class DegenerateZero(QcurvError):
    pass


class GridTooCoarse(QcurvError, ValueError):
    pass


class HypothesisViolated(QcurvError):
    pass


class IllConditioned(QcurvError, ValueError):
    pass


class ParseError(QcurvError, ValueError):
    """Input file could not be parsed; ``lineno`` names the offending line."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class IncompleteSearch(UserWarning):
    """Critical point search found a set whose Morse count misses the Euler characteristic."""


class NotASolution(UserWarning):
    """A field handed to a balance check does not solve the equation to tolerance."""
