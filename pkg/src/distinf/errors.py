"""Exception types raised across the package.

Every error derives from :class:`DistinfError`, which is itself a
``ValueError`` so callers that only care about bad input can catch that.
"""


class DistinfError(ValueError):
    pass


class EqualRatios(DistinfError):
    pass


class OmegaOutOfRange(DistinfError):
    pass


class DegenerateAlpha(DistinfError):
    pass


class NonpositiveError(DistinfError):
    pass


class UnorderedSpecs(DistinfError):
    pass


class ZeroDenominator(DistinfError):
    pass


class TooLarge(DistinfError):
    pass


class LengthMismatch(DistinfError):
    pass


class IncompatibleArch(DistinfError):
    pass


class ShapeMismatch(DistinfError):
    pass


class NumericalDivergence(ArithmeticError):
    """Training produced a non-finite parameter."""


class BadLayerIndex(DistinfError):
    pass


class MalformedDocument(DistinfError):
    pass


class MissingLabel(DistinfError):
    pass


class ArchMismatch(DistinfError):
    pass


class ConfigError(DistinfError):
    pass


class UnknownAttack(DistinfError):
    pass
