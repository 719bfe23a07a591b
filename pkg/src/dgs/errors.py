"""Exception hierarchy shared by all dgs modules."""


class DgsError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DgsError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(DgsError):
    """A manifest or record violates the data contract."""


class IoError(DgsError):
    """Reading or writing an artifact file failed."""


class DegenerateDistribution(DgsError):
    """A distribution has no usable spread (all-zero histogram, constant values)."""


class InsufficientSupply(DgsError):
    """A pool or interval holds fewer items than a plan demands."""


class DeficitError(DgsError):
    """Unmet per-interval demand under the 'fail' deficit rule."""
