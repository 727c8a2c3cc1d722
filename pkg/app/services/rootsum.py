"""
Signed sums of square roots: canonical radical form, exact integrality,
conjugate-product separation bounds and certified distance to the nearest
integer (optionally shifted by a rational offset y).

Every real number here is carried as a bigfix Interval. Precision escalates
by doubling until the enclosure is narrower than a separation bound, so a
certificate always decides the question it was asked.
"""

from __future__ import annotations

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

from app.core.config import get_settings
from app.core.metrics import (
    certification_precision_bits,
    certifications_total,
    precision_escalations_total,
)
from app.exceptions.custom_exceptions import (
    ContractViolationException,
    ParseException,
    PrecisionLimitException,
    ValidationException,
)
from app.services.bigfix import (
    QUARTER,
    Interval,
    NearestInteger,
    frac_nearest,
    sqrt_enclosure,
)
from app.services.numbertheory import squarefree_decompose

_logger = logging.getLogger(__name__)

# Working precision for upper bounds on |c_d| * sqrt(d) inside separation bounds
_BOUND_PRECISION = 64

_TERM_PATTERN = re.compile(r"^([+-]?)(\d+)$")


@dataclass(frozen=True)
class Term:
    radicand: int
    sign: int = 1


@dataclass(frozen=True)
class RootSumExpr:
    """``sum(sign_i * sqrt(radicand_i))`` over an ordered list of terms."""

    terms: Tuple[Term, ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValidationException("A root sum needs at least one term")
        for position, term in enumerate(self.terms, start=1):
            if term.radicand < 1:
                raise ValidationException(
                    "Radicands must be positive integers",
                    details={"position": position, "radicand": term.radicand},
                )
            if term.sign not in (1, -1):
                raise ValidationException(
                    "Signs must be +1 or -1",
                    details={"position": position, "sign": term.sign},
                )

    @classmethod
    def from_radicands(
        cls, radicands: Iterable[int], signs: Optional[Iterable[int]] = None
    ) -> "RootSumExpr":
        radicands = [int(a) for a in radicands]
        signs = [1] * len(radicands) if signs is None else [int(s) for s in signs]
        if len(signs) != len(radicands):
            raise ValidationException(
                "radicands and signs differ in length",
                details={"radicands": len(radicands), "signs": len(signs)},
            )
        return cls(tuple(Term(a, s) for a, s in zip(radicands, signs)))

    @property
    def k(self) -> int:
        return len(self.terms)

    @property
    def n_max(self) -> int:
        return max(term.radicand for term in self.terms)

    @property
    def radicands(self) -> Tuple[int, ...]:
        return tuple(term.radicand for term in self.terms)

    @property
    def signs(self) -> Tuple[int, ...]:
        return tuple(term.sign for term in self.terms)

    def is_unsigned(self) -> bool:
        return all(term.sign == 1 for term in self.terms)

    def __str__(self) -> str:
        return " ".join(f"{'+' if t.sign > 0 else '-'}{t.radicand}" for t in self.terms)


def parse_terms(text: Union[str, Sequence[str]]) -> RootSumExpr:
    """Parse ``"+3 +20 +23"`` or ``"29 1097 -226"`` (commas also separate)."""
    tokens = text.replace(",", " ").split() if isinstance(text, str) else [
        piece for token in text for piece in token.replace(",", " ").split()
    ]
    if not tokens:
        raise ParseException("Empty term list", details={"position": 0, "token": ""})
    terms = []
    for position, token in enumerate(tokens, start=1):
        match = _TERM_PATTERN.match(token)
        if match is None:
            raise ParseException(
                f"Cannot parse term {token!r} at position {position}",
                details={"position": position, "token": token},
            )
        radicand = int(match.group(2))
        if radicand == 0:
            raise ParseException(
                f"Radicand at position {position} must be positive",
                details={"position": position, "token": token},
            )
        terms.append(Term(radicand, -1 if match.group(1) == "-" else 1))
    return RootSumExpr(tuple(terms))


@dataclass(frozen=True)
class CanonicalRadicalForm:
    """``c1 + sum(c_d * sqrt(d))`` over distinct squarefree ``d > 1``, all ``c_d != 0``."""

    rational_part: int
    radical_terms: Tuple[Tuple[int, int], ...]

    @property
    def t(self) -> int:
        return len(self.radical_terms)

    def coefficients(self) -> Dict[int, int]:
        return dict(self.radical_terms)

    def is_rational(self) -> bool:
        return not self.radical_terms


class IntegerTest(NamedTuple):
    is_integer: bool
    value: Optional[int]


@dataclass(frozen=True)
class DistanceCertificate:
    nearest_integer: int
    distance_enclosure: Interval
    precision_bits: int
    exactly_integer: bool
    value_enclosure: Interval
    shifted_enclosure: Interval
    offset: Fraction = Fraction(0)
    separation_bound: Optional[Fraction] = None
    exact_distance: Optional[Fraction] = None

    def distance_decimal(self, digits: int = 20) -> Tuple[str, str]:
        return self.distance_enclosure.to_decimal_pair(digits)

    def value_decimal(self, digits: int = 20) -> Tuple[str, str]:
        return self.value_enclosure.to_decimal_pair(digits)


class SignDecision(NamedTuple):
    sign: int
    enclosure: Interval
    precision_bits: int
    is_integer: bool
    integer_value: Optional[int]


def canonicalize(e: RootSumExpr) -> CanonicalRadicalForm:
    rational_part = 0
    coefficients: Dict[int, int] = defaultdict(int)
    for term in e.terms:
        decomposition = squarefree_decompose(term.radicand)
        if decomposition.d == 1:
            rational_part += term.sign * decomposition.s
        else:
            coefficients[decomposition.d] += term.sign * decomposition.s
    radical_terms = tuple(sorted((d, c) for d, c in coefficients.items() if c != 0))
    return CanonicalRadicalForm(rational_part=rational_part, radical_terms=radical_terms)


def is_integer(e: RootSumExpr) -> IntegerTest:
    """Exact: radicals of distinct squarefree parts are linearly independent over Q."""
    form = canonicalize(e)
    if form.is_rational():
        return IntegerTest(True, form.rational_part)
    return IntegerTest(False, None)


def evaluate(e: RootSumExpr, precision_bits: int) -> Interval:
    """Enclosure of the expression, term by term."""
    total = Interval.point(0)
    for term in e.terms:
        root = sqrt_enclosure(term.radicand, precision_bits)
        total = total + (root if term.sign > 0 else -root)
    return total


def _guard_bits(pieces: int) -> int:
    """Extra bits so that ``pieces`` roundings of ``2**-w`` sum to at most ``2**-p``."""
    return max(pieces - 1, 0).bit_length()


def evaluate_form(form: CanonicalRadicalForm, precision_bits: int, extra_pieces: int = 0) -> Interval:
    """
    Enclosure of a canonical form of width at most ``2**-precision_bits``, plus
    room for ``extra_pieces`` further roundings at the returned scale.

    ``c * sqrt(d)`` is taken as ``±sqrt(c^2 d)``.
    """
    working = precision_bits + _guard_bits(form.t + extra_pieces)
    total = Interval.point(form.rational_part)
    for d, c in form.radical_terms:
        root = sqrt_enclosure(c * c * d, working)
        total = total + (root if c > 0 else -root)
    return total


def _as_offset(offset: Union[int, Fraction, str, None]) -> Fraction:
    y = Fraction(0) if offset is None else Fraction(offset)
    if not 0 <= y < 1:
        raise ValidationException(
            "The target offset y must lie in [0, 1)",
            details={"offset": str(y)},
        )
    return y


def _radical_mass_upper(form: CanonicalRadicalForm) -> Fraction:
    """Certified upper bound on ``sum(|c_d| * sqrt(d))``."""
    return sum(
        (abs(c) * sqrt_enclosure(d, _BOUND_PRECISION).hi.to_fraction()
         for d, c in form.radical_terms),
        Fraction(0),
    )


def _bound_from_factor(factor_bound: Fraction, t: int, denominator: int) -> Fraction:
    exponent = (1 << t) - 1
    approx_bits = exponent * max(
        factor_bound.numerator.bit_length() - factor_bound.denominator.bit_length(), 1
    )
    limit = get_settings().MAX_PRECISION_BITS
    if approx_bits > limit:
        raise PrecisionLimitException(
            "Separation bound would need more precision than allowed",
            details={"radicals": t, "approx_bits": approx_bits, "limit": limit},
        )
    return 1 / (denominator * factor_bound**exponent)


def conjugate_bound(
    form: CanonicalRadicalForm, nearest: int, offset: Fraction = Fraction(0)
) -> Fraction:
    """
    Lower bound on ``|value(form) - offset - nearest|`` for a non-rational form.

    With ``offset = u/q`` the conjugates of ``q*(value - offset - nearest)`` over
    all 2^t sign patterns multiply to a nonzero integer; each of the other
    2^t - 1 factors is at most ``|q*(c1 - nearest) - u| + q*S``.
    """
    if form.is_rational():
        raise ContractViolationException(
            "Separation bounds are only defined for non-rational forms",
            details={"rational_part": form.rational_part},
        )
    q, u = offset.denominator, offset.numerator
    factor_bound = abs(q * (form.rational_part - nearest) - u) + q * _radical_mass_upper(form)
    return _bound_from_factor(factor_bound, form.t, q)


def generic_separation_bound(e: RootSumExpr) -> Fraction:
    """Bound on the distance to the nearest integer that needs no evaluation."""
    form = canonicalize(e)
    if form.is_rational():
        raise ContractViolationException(
            "separation_bound called on an exact integer expression",
            details={"expression": str(e)},
        )
    # With m nearest, |c1 - m| <= S + 1/2, so every other conjugate is <= 2S + 1/2.
    return _bound_from_factor(2 * _radical_mass_upper(form) + 1, form.t, 1)


def _escalate(precision_bits: int) -> int:
    limit = get_settings().MAX_PRECISION_BITS
    if precision_bits >= limit:
        certifications_total.labels(outcome="precision_limit").inc()
        raise PrecisionLimitException(
            "Adaptive evaluation exceeded the precision ceiling",
            details={"precision_bits": precision_bits, "limit": limit},
        )
    precision_escalations_total.inc()
    return min(precision_bits * 2, limit)


def _initial_precision(precision_bits: Optional[int]) -> int:
    settings = get_settings()
    if precision_bits is None:
        return settings.DEFAULT_PRECISION_BITS
    if precision_bits < 1:
        raise ValidationException(
            "precision_bits must be positive", details={"precision_bits": precision_bits}
        )
    return precision_bits


def _shifted_enclosure(form: CanonicalRadicalForm, offset: Fraction, precision_bits: int) -> Interval:
    if offset == 0:
        return evaluate_form(form, precision_bits)
    value = evaluate_form(form, precision_bits, extra_pieces=1)
    return value - Interval.from_rational(offset, value.scale)


def _resolve_nearest(
    form: CanonicalRadicalForm, offset: Fraction, precision_bits: int
) -> Tuple[NearestInteger, Interval, int]:
    p = precision_bits
    while True:
        x = _shifted_enclosure(form, offset, p)
        if x.width < QUARTER:
            near = frac_nearest(x)
            if near is not None:
                return near, x, p
        p = _escalate(p)


def _rational_certificate(
    form: CanonicalRadicalForm, offset: Fraction, precision_bits: int
) -> DistanceCertificate:
    x = form.rational_part - offset
    nearest = math.floor(x + Fraction(1, 2))
    distance = abs(x - nearest)
    # Enough extra bits that a nonzero rational distance keeps a positive lower endpoint
    scale = precision_bits + offset.denominator.bit_length()
    certifications_total.labels(outcome="exact").inc()
    return DistanceCertificate(
        nearest_integer=nearest,
        distance_enclosure=Interval.from_rational(distance, scale),
        precision_bits=precision_bits,
        exactly_integer=distance == 0,
        value_enclosure=Interval.from_rational(x + offset, scale),
        shifted_enclosure=Interval.from_rational(x, scale),
        offset=offset,
        exact_distance=distance,
    )


def separation_bound(e: RootSumExpr, offset: Union[int, Fraction, None] = None) -> Fraction:
    """``B > 0`` with ``||value(e) - y|| >= B``; raises on exact integers."""
    y = _as_offset(offset)
    form = canonicalize(e)
    if form.is_rational():
        raise ContractViolationException(
            "separation_bound called on an exact integer expression",
            details={"expression": str(e)},
        )
    near, _, _ = _resolve_nearest(form, y, _initial_precision(None))
    return conjugate_bound(form, near.nearest_integer, y)


def certified_distance(
    e: RootSumExpr,
    offset: Union[int, Fraction, None] = None,
    precision_bits: Optional[int] = None,
) -> DistanceCertificate:
    """
    Certified ``||value(e) - y||``.

    Exact for rational forms. Otherwise precision doubles until ``2**-p < B``
    for the conjugate bound ``B``; the distance enclosure is at most ``2**-p``
    wide, so its lower endpoint is strictly positive.
    """
    y = _as_offset(offset)
    form = canonicalize(e)
    p = _initial_precision(precision_bits)
    if form.is_rational():
        return _rational_certificate(form, y, p)

    bound: Optional[Fraction] = None
    bound_for: Optional[int] = None
    while True:
        near, x, p = _resolve_nearest(form, y, p)
        if bound_for != near.nearest_integer:
            bound = conjugate_bound(form, near.nearest_integer, y)
            bound_for = near.nearest_integer
        # The enclosure is at most 2^-p wide
        if Fraction(1, 1 << p) < bound:
            break
        p = _escalate(p)

    certifications_total.labels(outcome="certified").inc()
    certification_precision_bits.observe(p)
    _logger.debug(
        "Certified distance",
        extra={"event": "certified", "expression": str(e), "precision_bits": p},
    )
    return DistanceCertificate(
        nearest_integer=near.nearest_integer,
        distance_enclosure=near.distance,
        precision_bits=p,
        exactly_integer=False,
        value_enclosure=x + Interval.from_rational(y, p) if y else x,
        shifted_enclosure=x,
        offset=y,
        separation_bound=bound,
    )


def certify_within(
    e: RootSumExpr,
    threshold: Fraction,
    offset: Union[int, Fraction, None] = None,
    precision_bits: Optional[int] = None,
) -> Optional[DistanceCertificate]:
    """Certificate if ``||value(e) - y|| <= threshold`` is decided true, else None."""
    cert = certified_distance(e, offset, precision_bits)
    while True:
        if cert.exact_distance is not None:
            return cert if cert.exact_distance <= threshold else None
        if cert.distance_enclosure.hi <= threshold:
            return cert
        if cert.distance_enclosure.lo > threshold:
            return None
        # An irrational distance never equals a rational threshold
        cert = certified_distance(e, offset, _escalate(cert.precision_bits))


def sign(e: RootSumExpr, precision_bits: Optional[int] = None) -> SignDecision:
    """Certified sign of ``sum(sign_i * sqrt(a_i))``."""
    form = canonicalize(e)
    p = _initial_precision(precision_bits)
    if form.is_rational():
        value = form.rational_part
        return SignDecision(
            sign=(value > 0) - (value < 0),
            enclosure=Interval.point(value),
            precision_bits=p,
            is_integer=True,
            integer_value=value,
        )
    # |value| >= conjugate bound at m = 0
    bound = conjugate_bound(form, 0)
    while True:
        x = evaluate_form(form, p)
        if x.excludes_zero() and x.width < bound:
            break
        p = _escalate(p)
    return SignDecision(
        sign=1 if x.lo > 0 else -1,
        enclosure=x,
        precision_bits=p,
        is_integer=False,
        integer_value=None,
    )


def combine(parts: Iterable[Tuple[int, RootSumExpr]], constant: int = 0) -> RootSumExpr:
    """``sum(sign * e for sign, e in parts) + constant`` as a single expression."""
    terms = [
        Term(term.radicand, term.sign * s) for s, expr in parts for term in expr.terms
    ]
    if constant:
        terms.append(Term(constant * constant, 1 if constant > 0 else -1))
    if not terms:
        terms.append(Term(1, 1))
        terms.append(Term(1, -1))
    return RootSumExpr(tuple(terms))


def side_of_nearest(cert: DistanceCertificate) -> int:
    """+1 if the shifted value lies above its nearest integer, -1 if below, 0 if equal."""
    if cert.exactly_integer:
        return 0
    # A positive distance lower endpoint keeps the nearest integer outside the enclosure
    return 1 if cert.shifted_enclosure.lo >= cert.nearest_integer else -1
