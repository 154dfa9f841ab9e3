"""Exception and warning classes raised across the package."""


class XsdrError(Exception):
    """Base class for all errors raised by xsdr."""


class NonFiniteInput(XsdrError, ValueError):
    pass


class EmptyInput(XsdrError, ValueError):
    pass


class SingularCovariance(XsdrError, ValueError):
    """Every eigenvalue of the sample covariance is numerically zero."""


class NotSymmetric(XsdrError, ValueError):
    pass


class AllEigenvaluesBelowFloor(XsdrError, ValueError):
    pass


class RankDeficientBasis(XsdrError, ValueError):
    pass


class TauOutOfRange(XsdrError, ValueError):
    pass


class DegenerateSample(XsdrError, ValueError):
    """All rows coincide, so distance-based quantities are undefined."""


class SolveFailure(XsdrError, RuntimeError):
    pass


class TooManySlices(XsdrError, ValueError):
    pass


class EmptySlice(XsdrError, ValueError):
    pass


class InvalidOptions(XsdrError, ValueError):
    pass


class InvalidP(XsdrError, ValueError):
    pass


class NoConvergence(UserWarning):
    """IRLS hit its iteration cap; the best iterate is returned."""


class RankDeficient(UserWarning):
    """Fewer than ``d`` eigenvalues of a candidate matrix are nonzero."""
