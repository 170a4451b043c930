"""Exception hierarchy.

Every error carries a stable class name; the CLI reports that name when a
numeric failure aborts a command.
"""


class WarpBaryError(Exception):
    """Base class for all library errors."""


class NonFinite(WarpBaryError, ValueError):
    pass


class BadWeights(WarpBaryError, ValueError):
    pass


class EmptyMeasure(WarpBaryError, ValueError):
    pass


class OutOfRange(WarpBaryError, ValueError):
    pass


class DomainError(WarpBaryError, ValueError):
    pass


class DimensionMismatch(WarpBaryError, ValueError):
    pass


class TooLarge(WarpBaryError, ValueError):
    pass


class NotSPD(WarpBaryError, ValueError):
    pass


class NotInvertible(WarpBaryError, ValueError):
    pass


class BadSpread(WarpBaryError, ValueError):
    pass


class WeightError(WarpBaryError, ValueError):
    pass


class KindMismatch(WarpBaryError, TypeError):
    pass


class NotAdmissible(WarpBaryError, ValueError):
    pass


class NoConvergence(WarpBaryError, RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class BadBandwidth(WarpBaryError, ValueError):
    pass


class EmptyGroup(WarpBaryError, ValueError):
    pass


class DegenerateDirection(WarpBaryError, ValueError):
    pass


class BadK(WarpBaryError, ValueError):
    pass
