"""Exact dyadic rationals ``numerator / 2**exponent``."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

from .errors import NonDyadicScale


@total_ordering
@dataclass(frozen=True)
class DyadicRational:
    """A rational number whose denominator is a power of two.

    Stored canonically with the smallest exponent, so the numerator is odd
    whenever the exponent is positive.  Negative exponents are not allowed;
    integers use exponent 0.
    """

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("exponent must be nonnegative")
        num, exp = _canonical(self.numerator, self.exponent)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "exponent", exp)

    @classmethod
    def from_fraction(cls, value) -> DyadicRational:
        frac = Fraction(value)
        den = frac.denominator
        if den & (den - 1):
            raise NonDyadicScale(f"{value} is not a dyadic rational")
        return cls(frac.numerator, den.bit_length() - 1)

    @classmethod
    def pow2(cls, k: int) -> DyadicRational:
        """``2**k`` for any integer k."""
        if k >= 0:
            return cls(1 << k, 0)
        return cls(1, -k)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def _align(self, other: DyadicRational) -> tuple[int, int, int]:
        e = max(self.exponent, other.exponent)
        return self.numerator << (e - self.exponent), other.numerator << (e - other.exponent), e

    def __add__(self, other):
        other = _coerce(other)
        a, b, e = self._align(other)
        return DyadicRational(a + b, e)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        a, b, e = self._align(other)
        return DyadicRational(a - b, e)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return DyadicRational(-self.numerator, self.exponent)

    def __mul__(self, other):
        other = _coerce(other)
        return DyadicRational(self.numerator * other.numerator, self.exponent + other.exponent)

    __rmul__ = __mul__

    def halve(self) -> DyadicRational:
        return DyadicRational(self.numerator, self.exponent + 1)

    def scale_pow2(self, k: int) -> DyadicRational:
        """Multiply by ``2**k``."""
        if k >= 0:
            return DyadicRational(self.numerator << k, self.exponent)
        return DyadicRational(self.numerator, self.exponent - k)

    def __eq__(self, other):
        if isinstance(other, DyadicRational):
            return self.numerator == other.numerator and self.exponent == other.exponent
        if isinstance(other, (int, Fraction)):
            return self.to_fraction() == other
        return NotImplemented

    def __hash__(self):
        return hash((self.numerator, self.exponent))

    def __lt__(self, other):
        other = _coerce(other)
        a, b, _ = self._align(other)
        return a < b

    def __float__(self):
        # exact whenever the numerator fits in 53 bits
        return float(self.to_fraction())

    def __repr__(self):
        if self.exponent == 0:
            return f"D({self.numerator})"
        return f"D({self.numerator}/2^{self.exponent})"

    def __str__(self):
        return str(self.to_fraction())


def _canonical(num: int, exp: int) -> tuple[int, int]:
    if num == 0:
        return 0, 0
    while exp > 0 and num % 2 == 0:
        num //= 2
        exp -= 1
    return num, exp


def _coerce(value) -> DyadicRational:
    if isinstance(value, DyadicRational):
        return value
    if isinstance(value, int):
        return DyadicRational(value, 0)
    if isinstance(value, Fraction):
        return DyadicRational.from_fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as a dyadic rational")


ZERO = DyadicRational(0)
ONE = DyadicRational(1)


def log2_exact(value: int | Fraction, what: str = "value") -> int:
    """Return k with ``value == 2**k`` or raise NonDyadicScale."""
    frac = Fraction(value)
    if frac <= 0:
        raise NonDyadicScale(f"{what}={value} is not a positive power of 2")
    num, den = frac.numerator, frac.denominator
    if num & (num - 1) or den & (den - 1) or (num != 1 and den != 1):
        raise NonDyadicScale(f"{what}={value} is not a power of 2")
    return (num.bit_length() - 1) - (den.bit_length() - 1)
