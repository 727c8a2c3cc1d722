"""
Arbitrary-precision dyadic fixed-point numbers and outward-rounded intervals.

A `FixedPoint` is ``mantissa * 2**-scale`` with an unbounded integer mantissa.
Addition, subtraction and multiplication are exact; the only rounding happens
when an endpoint is explicitly moved to a coarser scale, and then always
outward (lower endpoints down, upper endpoints up). No floating-point unit is
involved anywhere in the certified paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from functools import lru_cache, total_ordering
from typing import Literal, Optional, Tuple, Union

from app.exceptions.custom_exceptions import (
    DomainException,
    PreconditionException,
    ValidationException,
)

Rounding = Literal["floor", "ceil"]
Rational = Union[int, Fraction]

QUARTER = Fraction(1, 4)


def isqrt(value: int) -> int:
    """Floor square root by integer Newton iteration."""
    if value < 0:
        raise DomainException(
            "Square root of a negative integer",
            details={"value": value},
        )
    if value < 2:
        return value
    # 2**ceil(bits/2) >= sqrt(value), so the iteration decreases monotonically
    x = 1 << ((value.bit_length() + 1) // 2)
    while True:
        y = (x + value // x) >> 1
        if y >= x:
            return x
        x = y


def _shift_round(mantissa: int, shift: int, rounding: Rounding) -> int:
    if shift <= 0:
        return mantissa << -shift
    if rounding == "floor":
        return mantissa >> shift
    return -((-mantissa) >> shift)


@total_ordering
@dataclass(frozen=True, eq=False)
class FixedPoint:
    """An exact dyadic rational ``mantissa * 2**-scale``."""

    mantissa: int
    scale: int = 0

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise ValidationException(
                "FixedPoint scale must be non-negative",
                details={"scale": self.scale},
            )

    @classmethod
    def from_int(cls, value: int) -> "FixedPoint":
        return cls(int(value), 0)

    @classmethod
    def from_rational(cls, value: Rational, scale: int, rounding: Rounding) -> "FixedPoint":
        """Round a rational to ``scale`` fractional bits in the given direction."""
        frac = Fraction(value)
        q, r = divmod(frac.numerator << scale, frac.denominator)
        if r and rounding == "ceil":
            q += 1
        return cls(q, scale)

    def rescale(self, scale: int) -> "FixedPoint":
        """Exact change to a finer scale."""
        if scale < self.scale:
            raise ValidationException(
                "rescale only refines; use round_to for coarser scales",
                details={"from": self.scale, "to": scale},
            )
        return FixedPoint(self.mantissa << (scale - self.scale), scale)

    def round_to(self, scale: int, rounding: Rounding) -> "FixedPoint":
        if scale >= self.scale:
            return self.rescale(scale)
        return FixedPoint(_shift_round(self.mantissa, self.scale - scale, rounding), scale)

    def _align(self, other: "FixedPoint") -> Tuple[int, int, int]:
        scale = max(self.scale, other.scale)
        return (
            self.mantissa << (scale - self.scale),
            other.mantissa << (scale - other.scale),
            scale,
        )

    @staticmethod
    def _coerce(other: object) -> Optional["FixedPoint"]:
        if isinstance(other, FixedPoint):
            return other
        if isinstance(other, int):
            return FixedPoint(other, 0)
        return None

    def __add__(self, other: object) -> "FixedPoint":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        a, b, scale = self._align(rhs)
        return FixedPoint(a + b, scale)

    __radd__ = __add__

    def __sub__(self, other: object) -> "FixedPoint":
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        a, b, scale = self._align(rhs)
        return FixedPoint(a - b, scale)

    def __rsub__(self, other: object) -> "FixedPoint":
        lhs = self._coerce(other)
        if lhs is None:
            return NotImplemented
        return lhs - self

    def __neg__(self) -> "FixedPoint":
        return FixedPoint(-self.mantissa, self.scale)

    def __abs__(self) -> "FixedPoint":
        return FixedPoint(abs(self.mantissa), self.scale)

    def __mul__(self, other: object) -> "FixedPoint":
        if isinstance(other, int):
            return FixedPoint(self.mantissa * other, self.scale)
        if isinstance(other, FixedPoint):
            return FixedPoint(self.mantissa * other.mantissa, self.scale + other.scale)
        return NotImplemented

    __rmul__ = __mul__

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.scale)

    def floor(self) -> int:
        return self.mantissa >> self.scale

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def __float__(self) -> float:
        return float(self.to_fraction())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Fraction):
            return self.to_fraction() == other
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        a, b, _ = self._align(rhs)
        return a == b

    def __lt__(self, other: object) -> bool:
        if isinstance(other, Fraction):
            return self.to_fraction() < other
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        a, b, _ = self._align(rhs)
        return a < b

    def __hash__(self) -> int:
        return hash(self.to_fraction())

    def to_decimal(self, digits: int = 20) -> str:
        return _fraction_to_decimal(self.to_fraction(), digits, ROUND_HALF_EVEN)

    def __repr__(self) -> str:
        return f"FixedPoint({self.mantissa}, scale={self.scale})"


ZERO = FixedPoint(0, 0)


def _fraction_to_decimal(value: Fraction, digits: int, rounding: str) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = rounding
        return str(Decimal(value.numerator) / Decimal(value.denominator))


@dataclass(frozen=True)
class Interval:
    """A closed interval ``[lo, hi]`` of FixedPoint endpoints."""

    lo: FixedPoint
    hi: FixedPoint

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValidationException(
                "Interval endpoints out of order",
                details={"lo": repr(self.lo), "hi": repr(self.hi)},
            )

    @classmethod
    def point(cls, value: Union[FixedPoint, int]) -> "Interval":
        fp = value if isinstance(value, FixedPoint) else FixedPoint.from_int(value)
        return cls(fp, fp)

    @classmethod
    def from_rational(cls, value: Rational, scale: int) -> "Interval":
        """Smallest interval at ``scale`` bits containing ``value``."""
        return cls(
            FixedPoint.from_rational(value, scale, "floor"),
            FixedPoint.from_rational(value, scale, "ceil"),
        )

    @classmethod
    def from_bounds(cls, lo: Rational, hi: Rational, scale: int) -> "Interval":
        return cls(
            FixedPoint.from_rational(lo, scale, "floor"),
            FixedPoint.from_rational(hi, scale, "ceil"),
        )

    @property
    def width(self) -> FixedPoint:
        return self.hi - self.lo

    @property
    def midpoint(self) -> FixedPoint:
        total = self.lo + self.hi
        return FixedPoint(total.mantissa, total.scale + 1)

    @property
    def scale(self) -> int:
        return max(self.lo.scale, self.hi.scale)

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, value: Union[FixedPoint, Rational]) -> bool:
        return self.lo <= value <= self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def excludes_zero(self) -> bool:
        return self.lo > 0 or self.hi < 0

    def __add__(self, other: object) -> "Interval":
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        if isinstance(other, (int, FixedPoint)):
            return Interval(self.lo + other, self.hi + other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: object) -> "Interval":
        if isinstance(other, (Interval, int, FixedPoint)):
            return self + (-other)
        return NotImplemented

    def __mul__(self, other: object) -> "Interval":
        if isinstance(other, int):
            if other >= 0:
                return Interval(self.lo * other, self.hi * other)
            return Interval(self.hi * other, self.lo * other)
        if isinstance(other, Interval):
            products = (
                self.lo * other.lo,
                self.lo * other.hi,
                self.hi * other.lo,
                self.hi * other.hi,
            )
            return Interval(min(products), max(products))
        return NotImplemented

    __rmul__ = __mul__

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(ZERO, max(-self.lo, self.hi))

    def round_out(self, scale: int) -> "Interval":
        """Coarsen both endpoints to ``scale`` bits, rounding outward."""
        return Interval(self.lo.round_to(scale, "floor"), self.hi.round_to(scale, "ceil"))

    def to_decimal_pair(self, digits: int = 20) -> Tuple[str, str]:
        """``(value, radius)`` decimal strings with ``value ± radius`` enclosing self."""
        mid = self.midpoint.to_fraction()
        value = _fraction_to_decimal(mid, digits, ROUND_HALF_EVEN)
        radius = self.width.to_fraction() / 2 + abs(mid - Fraction(Decimal(value)))
        if radius == 0:
            return value, "0"
        return value, _fraction_to_decimal(radius, 3, ROUND_CEILING)

    def __repr__(self) -> str:
        return f"Interval[{self.lo.to_decimal(12)}, {self.hi.to_decimal(12)}]"


@dataclass(frozen=True)
class NearestInteger:
    nearest_integer: int
    distance: Interval


@lru_cache(maxsize=1 << 16)
def _sqrt_bracket(a: int, precision_bits: int) -> Tuple[int, bool]:
    scaled = a << (2 * precision_bits)
    r = isqrt(scaled)
    return r, r * r == scaled


def sqrt_enclosure(a: int, precision_bits: int) -> Interval:
    """Certified enclosure of ``sqrt(a)`` of width at most ``2**-precision_bits``."""
    if a < 1:
        raise DomainException(
            "Square root enclosure needs a positive integer radicand",
            details={"radicand": a},
        )
    if precision_bits < 1:
        raise ValidationException(
            "precision_bits must be positive",
            details={"precision_bits": precision_bits},
        )
    r, exact = _sqrt_bracket(a, precision_bits)
    if exact:
        return Interval.point(FixedPoint(r, precision_bits))
    return Interval(FixedPoint(r, precision_bits), FixedPoint(r + 1, precision_bits))


def interval_add(x: Interval, y: Interval) -> Interval:
    return x + y


def frac_nearest(x: Interval) -> Optional[NearestInteger]:
    """
    Nearest integer to an enclosed real and an enclosure of the distance to it.

    Returns None (indeterminate) when the enclosure reaches a half-integer;
    the caller must raise precision and retry.
    """
    if x.width >= QUARTER:
        raise PreconditionException(
            "frac_nearest needs an enclosure narrower than 1/4",
            details={"width": float(x.width)},
        )
    half = FixedPoint(1, 1)
    m = (x.lo + half).floor()
    if x.lo == m - half or x.hi >= m + half:
        return None

    mm = FixedPoint.from_int(m)
    if x.lo >= mm:
        distance = Interval(x.lo - mm, x.hi - mm)
    elif x.hi <= mm:
        distance = Interval(mm - x.hi, mm - x.lo)
    else:
        distance = Interval(ZERO, max(mm - x.lo, x.hi - mm))
    return NearestInteger(nearest_integer=m, distance=distance)
