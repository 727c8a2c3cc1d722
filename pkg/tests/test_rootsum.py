"""
Test suite for signed root sums: parsing, canonical form, integrality,
separation bounds and certified distances.
"""

from fractions import Fraction

import gmpy2
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from app.exceptions import (
    ContractViolationException,
    ParseException,
    PrecisionLimitException,
    ValidationException,
)
from app.services.rootsum import (
    RootSumExpr,
    canonicalize,
    certified_distance,
    certify_within,
    combine,
    generic_separation_bound,
    is_integer,
    parse_terms,
    separation_bound,
    side_of_nearest,
    sign,
)
from app.services.search import binomial_expression

ORACLE_BITS = 320

signed_terms = st.lists(
    st.tuples(st.integers(min_value=1, max_value=10**6), st.sampled_from([1, -1])),
    min_size=1,
    max_size=4,
)
wide_terms = st.lists(
    st.tuples(st.integers(min_value=1, max_value=10**4), st.sampled_from([1, -1])),
    min_size=1,
    max_size=6,
)


def _oracle_value(expr: RootSumExpr) -> Fraction:
    """Floor-rounded term sum; within k units of 2^-ORACLE_BITS of the true value."""
    total = 0
    for term in expr.terms:
        total += term.sign * int(gmpy2.isqrt(term.radicand << (2 * ORACLE_BITS)))
    return Fraction(total, 1 << ORACLE_BITS)


class TestParseTerms:
    """Test parsing of term lists."""

    def test_signed_and_unsigned_tokens(self):
        expr = parse_terms("29 1097 -226")
        assert expr.radicands == (29, 1097, 226)
        assert expr.signs == (1, 1, -1)
        assert str(expr) == "+29 +1097 -226"

    def test_commas_and_token_lists(self):
        assert parse_terms("+3,+20,+23") == parse_terms(["+3", "+20 +23"])

    def test_bad_token_reports_position(self):
        with pytest.raises(ParseException) as exc_info:
            parse_terms("3 x 5")
        assert exc_info.value.details == {"position": 2, "token": "x"}

    def test_zero_and_empty_rejected(self):
        with pytest.raises(ParseException):
            parse_terms("+0")
        with pytest.raises(ParseException):
            parse_terms("   ")

    def test_expression_validation(self):
        with pytest.raises(ValidationException):
            RootSumExpr.from_radicands([2, 3], signs=[1])
        with pytest.raises(ValidationException):
            RootSumExpr.from_radicands([2], signs=[2])


class TestCanonicalForm:
    """Test canonical radical form and exact integrality."""

    def test_like_radicals_collect(self):
        form = canonicalize(parse_terms("+8 -32 +2"))
        assert form.rational_part == 0
        assert form.radical_terms == ((2, -1),)

    def test_perfect_squares_go_to_rational_part(self):
        form = canonicalize(parse_terms("+4 +9 +12"))
        assert form.rational_part == 5
        assert form.coefficients() == {3: 2}

    def test_is_integer(self):
        assert is_integer(parse_terms("+2 +8 -18")) == (True, 0)
        assert is_integer(parse_terms("+4 +9 +16")) == (True, 9)
        assert is_integer(parse_terms("+3 +20 +23")) == (False, None)

    @given(signed_terms)
    def test_canonical_form_preserves_value(self, terms):
        expr = RootSumExpr.from_radicands([a for a, _ in terms], [s for _, s in terms])
        form = canonicalize(expr)
        assert all(c != 0 for _, c in form.radical_terms)
        assert [d for d, _ in form.radical_terms] == sorted({d for d, _ in form.radical_terms})
        rebuilt = RootSumExpr.from_radicands(
            [c * c * d for d, c in form.radical_terms] + [1],
            [1 if c > 0 else -1 for _, c in form.radical_terms] + [1],
        )
        shift = form.rational_part - 1
        difference = _oracle_value(expr) - _oracle_value(rebuilt) - shift
        assert abs(difference) <= Fraction(2 * len(terms) + 2, 1 << ORACLE_BITS)


class TestCertifiedDistance:
    """Test certified distance to the nearest integer."""

    def test_classic_three_roots(self):
        cert = certified_distance(parse_terms("+3 +20 +23"))
        assert cert.nearest_integer == 11
        assert not cert.exactly_integer
        assert cert.distance_enclosure.lo > 0
        assert abs(float(cert.distance_enclosure.midpoint) / 1.8285881e-5 - 1) < 1e-6
        assert cert.distance_enclosure.width < cert.separation_bound

    def test_exact_integer(self):
        cert = certified_distance(parse_terms("+4 +9 +16"))
        assert cert.exactly_integer
        assert cert.nearest_integer == 9
        assert cert.exact_distance == 0
        assert cert.distance_enclosure.is_point()

    def test_signed_cancellation(self):
        cert = certified_distance(parse_terms("+29 +1097 +3153 -226 -2324 -987"))
        assert cert.distance_enclosure.lo > 0
        assert abs(float(cert.distance_enclosure.midpoint) / 2.84e-20 - 1) < 0.01

    def test_rational_offset(self):
        cert = certified_distance(parse_terms("+2"), offset=Fraction(1, 2))
        assert cert.nearest_integer == 1
        assert cert.offset == Fraction(1, 2)
        assert abs(float(cert.distance_enclosure.midpoint) - (1.5 - 2**0.5)) < 1e-12

    def test_rational_expression_with_offset_is_exact(self):
        cert = certified_distance(parse_terms("+4"), offset=Fraction(1, 3))
        assert cert.nearest_integer == 2
        assert cert.exact_distance == Fraction(1, 3)
        assert not cert.exactly_integer
        assert cert.distance_enclosure.lo > 0

    def test_offset_outside_unit_interval(self):
        with pytest.raises(ValidationException):
            certified_distance(parse_terms("+2"), offset=1)

    @given(signed_terms)
    def test_sound_against_high_precision_oracle(self, terms):
        """The enclosure always contains the value measured at much higher precision."""
        expr = RootSumExpr.from_radicands([a for a, _ in terms], [s for _, s in terms])
        cert = certified_distance(expr)
        oracle = _oracle_value(expr)
        slack = Fraction(len(terms), 1 << ORACLE_BITS)
        measured = abs(oracle - cert.nearest_integer)
        assert cert.distance_enclosure.lo.to_fraction() - slack <= measured
        assert measured <= cert.distance_enclosure.hi.to_fraction() + slack
        if not cert.exactly_integer:
            assert cert.distance_enclosure.lo > 0
            assert measured <= Fraction(1, 2)

    def test_precision_ceiling(self, configure):
        configure(MAX_PRECISION_BITS=128)
        with pytest.raises(PrecisionLimitException):
            certified_distance(binomial_expression(6, 10**6 + 1))

    @pytest.mark.parametrize("offset", [None, Fraction(1, 3)])
    def test_width_within_requested_precision(self, offset):
        cert = certified_distance(parse_terms("+3 +20 +23"), offset=offset, precision_bits=128)
        assert cert.precision_bits == 128
        assert cert.distance_enclosure.width <= Fraction(1, 1 << 128)

    @given(wide_terms)
    def test_width_never_exceeds_final_precision(self, terms):
        expr = RootSumExpr.from_radicands([a for a, _ in terms], [s for _, s in terms])
        cert = certified_distance(expr, precision_bits=64)
        assert cert.distance_enclosure.width <= Fraction(1, 1 << cert.precision_bits)

    @given(st.lists(st.integers(min_value=1, max_value=10**4), min_size=2, max_size=6).flatmap(
        lambda radicands: st.tuples(st.just(radicands), st.permutations(radicands))
    ))
    def test_permutation_invariance(self, pair):
        radicands, shuffled = pair
        first = certified_distance(RootSumExpr.from_radicands(radicands))
        second = certified_distance(RootSumExpr.from_radicands(shuffled))
        assert first.nearest_integer == second.nearest_integer
        assert first.distance_enclosure == second.distance_enclosure


class TestSeparationBound:
    """Test conjugate-product lower bounds."""

    def test_bound_below_certified_distance(self):
        expr = parse_terms("+3 +20 +23")
        bound = separation_bound(expr)
        assert 0 < bound <= certified_distance(expr).distance_enclosure.hi

    @given(wide_terms)
    def test_bound_is_sound_up_to_six_terms(self, terms):
        """The certified distance never falls below the bound, and the final precision beats it."""
        expr = RootSumExpr.from_radicands([a for a, _ in terms], [s for _, s in terms])
        assume(not is_integer(expr).is_integer)
        bound = separation_bound(expr)
        cert = certified_distance(expr)
        assert bound <= cert.distance_enclosure.lo
        assert Fraction(1, 1 << cert.precision_bits) < bound

    @given(signed_terms)
    def test_generic_bound_is_weaker(self, terms):
        expr = RootSumExpr.from_radicands([a for a, _ in terms], [s for _, s in terms])
        if is_integer(expr).is_integer:
            return
        assert 0 < generic_separation_bound(expr) <= separation_bound(expr)

    def test_integer_expression_has_no_bound(self):
        with pytest.raises(ContractViolationException):
            separation_bound(parse_terms("+4 +9"))
        with pytest.raises(ContractViolationException):
            generic_separation_bound(parse_terms("+2 +8 -18"))


class TestSign:
    """Test certified sign decisions."""

    def test_close_comparison(self):
        decision = sign(parse_terms("+10 +11 -5 -18"))
        assert decision.sign == 1
        assert not decision.is_integer
        assert 1.9e-4 < float(decision.enclosure.midpoint) < 2.0e-4

    def test_negative_and_zero(self):
        assert sign(parse_terms("+2 -8")).sign == -1
        zero = sign(parse_terms("+2 +8 -18"))
        assert zero.sign == 0 and zero.is_integer and zero.integer_value == 0

    def test_integer_expression(self):
        decision = sign(parse_terms("+9 -4"))
        assert decision.sign == 1
        assert decision.integer_value == 1


class TestCertifyWithin:
    """Test threshold decisions."""

    def test_threshold_decisions(self):
        expr = parse_terms("+3 +20 +23")
        assert certify_within(expr, Fraction(1, 10**4)) is not None
        assert certify_within(expr, Fraction(1, 10**6)) is None

    def test_exact_distances(self):
        expr = parse_terms("+4")
        assert certify_within(expr, Fraction(1, 3), offset=Fraction(1, 3)) is not None
        assert certify_within(expr, Fraction(1, 4), offset=Fraction(1, 3)) is None


class TestCombination:
    """Test expression combination helpers."""

    def test_combine_with_constant(self):
        expr = combine(
            [(1, parse_terms("+3 +20")), (-1, parse_terms("+23"))], constant=-3
        )
        assert expr.radicands == (3, 20, 23, 9)
        assert expr.signs == (1, 1, -1, -1)

    def test_empty_combination_is_zero(self):
        assert is_integer(combine([])) == (True, 0)

    def test_side_of_nearest(self):
        assert side_of_nearest(certified_distance(parse_terms("+3 +20 +23"))) == 1
        assert side_of_nearest(certified_distance(parse_terms("+3"))) == -1
        assert side_of_nearest(certified_distance(parse_terms("+9"))) == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
