"""Exception and warning types raised by the library."""


class CosError(Exception):
    """Base class for all numerical failures reported by ``dampedcos``."""


class StripViolation(CosError, ValueError):
    """A complex argument lies outside the strip where a transform exists."""


class InvalidParameters(CosError, ValueError):
    pass


class MomentUnavailable(CosError):
    pass


class NotSquareIntegrable(CosError):
    pass


class DampingNotSupported(CosError, ValueError):
    pass


class AllocationTooLarge(CosError, MemoryError):
    pass


class NotConverged(CosError):
    pass


class SmoothnessExceeded(CosError, ValueError):
    pass


class DecayTooSlow(CosError, ValueError):
    pass


class CorrelatedNotSupported(CosError, ValueError):
    pass


class TransformOverflow(CosError, OverflowError):
    """The log-magnitude of a transform exceeds the double range."""


class PlateauDetected(UserWarning):
    """The Parseval gap stopped shrinking before the stopping rule was met.

    Raised as a warning; the CLI escalates it to an error in strict mode.
    """
