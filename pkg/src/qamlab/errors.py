"""Exception hierarchy shared by every qamlab module.

All errors derive from :class:`QamError`, itself a ``ValueError``, so callers
that only care about "bad input" can catch ``ValueError``.
"""


class QamError(ValueError):
    """Base class for all qamlab errors."""


class UnsupportedOrder(QamError):
    """The requested constellation order is not supported for this family."""


class NotPowerOfFour(UnsupportedOrder):
    """A square constellation was requested with an order that is not 4**k."""


class RadiiNotIncreasing(QamError):
    """Star QAM ring radii must be positive and strictly increasing."""


class WrongFamily(QamError):
    """An operation received a constellation of the wrong family."""


class WrongConstellation(QamError):
    """An operation requires one specific constellation layout."""


class ZeroMagnitudeSample(QamError):
    """A differential amplitude ratio was requested for a zero sample."""


class PhiOutOfRange(QamError):
    """Craig-form angle outside ``[0, pi]``."""


class NonPositiveParams(QamError):
    """SEP parameters (tau, tau_c, K) must be positive (tau_c may be zero)."""


class RatioDegenerate(QamError):
    """A star QAM ring ratio of exactly one collapses the two rings."""


class MappingMismatch(QamError):
    """A bit mapping does not match the constellation it is used with."""


class UnsupportedPair(QamError):
    """A (family, order) pair has no defined constellation."""
