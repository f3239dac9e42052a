"""Exception types raised by the library."""


class DecoupError(ValueError):
    """Base class for all library errors."""


class NonDyadicScale(DecoupError):
    pass


class OutOfDomain(DecoupError):
    pass


class UnsupportedRegion(DecoupError):
    pass


class NotNested(DecoupError):
    pass


class SupportOutsideQ(DecoupError):
    pass


class QuadratureOrderTooLow(DecoupError):
    pass


class MismatchedLengths(DecoupError):
    pass


class DegenerateBox(DecoupError):
    pass


class EmptyEnsemble(DecoupError):
    pass


class BudgetTooSmall(DecoupError):
    pass


class NonCompatibleScales(DecoupError):
    pass


class TooFewScales(DecoupError):
    pass
