"""Exception hierarchy for genpe."""


class GenPEError(Exception):
    """Base class for every error raised by this package."""


class OutOfDomain(GenPEError, ValueError):
    """A time lies outside the range on which a signal is defined."""


class ValidationFailure(GenPEError, ValueError):
    """A matrix is not symmetric or not positive semidefinite within tolerance."""


class QuadratureStepInvalid(GenPEError, ValueError):
    pass


class NotSymmetric(GenPEError, ValueError):
    pass


class GridTooCoarse(GenPEError, ValueError):
    pass


class TruncationNotNonincreasing(GenPEError, ValueError):
    pass


class BadParameters(GenPEError, ValueError):
    pass


class StepInvalid(GenPEError, ValueError):
    pass


class NonContractive(GenPEError, ValueError):
    """A Picard window is too long for the iteration to contract."""


class SupportExceedsHorizon(GenPEError, ValueError):
    pass


class HorizonMismatch(GenPEError, ValueError):
    pass


class TauOutOfRange(GenPEError, ValueError):
    pass


class ParseError(GenPEError, ValueError):
    """A scenario or CSV file could not be parsed.

    The message carries the file, and where available the line or field path.
    """
