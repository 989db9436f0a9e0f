"""Exception types raised across the package."""


class EnergySuffError(Exception):
    """Base class for all package errors."""


class TooFewWaypoints(EnergySuffError, ValueError):
    pass


class DegenerateSegment(EnergySuffError, ValueError):
    def __init__(self, index: int):
        super().__init__(f"segment {index} has (near) zero length")
        self.index = index


class IndexOutOfRange(EnergySuffError, IndexError):
    pass


class KappaOutOfRange(EnergySuffError, ValueError):
    pass


class HeadMismatch(EnergySuffError, ValueError):
    pass


class NegativeSpeed(EnergySuffError, ValueError):
    pass


class NonPositiveReturnSpeed(EnergySuffError, ValueError):
    pass


class NoRealRoot(EnergySuffError, ArithmeticError):
    """The converged-speed equation has no real solution (disturbance too large)."""


class InvalidRadii(EnergySuffError, ValueError):
    pass


class InvalidAngles(EnergySuffError, ValueError):
    pass


class Infeasible(EnergySuffError, ArithmeticError):
    pass


class NotConverged(EnergySuffError, ArithmeticError):
    pass


class QpInfeasible(EnergySuffError, RuntimeError):
    """The safety QP had no solution during a controller step."""


class ConfigInvalid(EnergySuffError, ValueError):
    pass


class BoundsInvalid(EnergySuffError, ValueError):
    pass


class EmptyTrace(EnergySuffError, ValueError):
    pass
