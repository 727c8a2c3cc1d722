"""
Test suite for gap statistics and certified minimum distances.
"""

from itertools import combinations_with_replacement

import pytest

from app.exceptions import ResourceLimitException, ValidationException
from app.services.enumeration import KEY_MODULUS
from app.services.gaps import (
    _closer,
    circular_gaps,
    distinct_points,
    gap_report,
    largest_gap_trend,
    min_nonzero_distance,
    reference_shapes,
)
from app.services.rootsum import RootSumExpr, canonicalize, certified_distance

# Measured minima of min * n^1.5 (k=2, n in 20..200) and min * n^3.5
# (k=3, n in 10..40) are about 0.0879 and 1.067; the floors sit just below.
TWO_ROOT_FLOOR = 0.085
THREE_ROOT_FLOOR = 1.0


class TestGapReport:
    """Test gap structure reports."""

    def test_single_roots_up_to_four(self):
        """Points {0, frac sqrt 2, frac sqrt 3}; 1 and 4 coincide at 0."""
        report = gap_report(1, 4)
        assert report.point_count == 3
        assert report.merged_points == 1
        assert report.largest_gap == pytest.approx(2**0.5 - 1, abs=1e-12)
        assert report.largest_gap_flanks[0] == 0.0
        assert report.smallest_nonzero_element == pytest.approx(2**0.5 - 1, abs=1e-12)
        assert report.smallest_nonzero_tuple == [2]

    @pytest.mark.parametrize("k,n", [(1, 50), (2, 40), (3, 15)])
    def test_histogram_counts_every_gap(self, k, n):
        report = gap_report(k, n)
        assert sum(bucket.count for bucket in report.histogram) == report.point_count
        assert report.largest_gap >= 1 / report.point_count

    def test_exact_coincidences_merge(self):
        """sqrt 2 + sqrt 8 and sqrt 1 + sqrt 18 are the same point mod 1."""
        report = gap_report(2, 18)
        assert report.merged_points >= 1

    def test_reference_shapes_attached(self):
        report = gap_report(2, 20)
        assert report.reference_shapes == reference_shapes(2, 20)
        assert set(report.large_gap_counts) == {"1", "10", "100"}

    def test_size_limit(self, configure):
        configure(GAPS_MAX_POINTS=100)
        with pytest.raises(ResourceLimitException):
            gap_report(2, 20)

    @pytest.mark.parametrize("k,n", [(1, 30), (2, 40), (3, 12)])
    def test_circular_gaps_cover_the_circle(self, k, n):
        points = distinct_points(k, n).points
        gaps = circular_gaps(points)
        assert gaps.size == points.size
        assert sum(int(gap) for gap in gaps) == KEY_MODULUS

    def test_single_point_has_no_finite_gaps(self):
        points = distinct_points(1, 3).points
        assert points.size == 3
        assert circular_gaps(points[:1]).size == 0

    @pytest.mark.parametrize("k,n", [(2, 50), (3, 12)])
    def test_only_exact_coincidences_merge(self, k, n):
        """Two tuples are one point iff their radical parts agree."""
        classes = {
            canonicalize(RootSumExpr.from_radicands(radicands)).radical_terms
            for radicands in combinations_with_replacement(range(1, n + 1), k)
        }
        assert gap_report(k, n).point_count == len(classes)


class TestLargestGapTrend:
    """Test the largest gap along a grid of n."""

    def test_two_root_gap_never_grows(self):
        trend = largest_gap_trend(2, [160, 20, 40, 80])
        assert [point.n for point in trend.points] == [20, 40, 80, 160]
        assert trend.non_increasing and trend.violations == []
        gaps = [point.largest_gap for point in trend.points]
        assert all(later <= earlier + 1e-15 for earlier, later in zip(gaps, gaps[1:]))
        assert trend.points[0].scaled_gap == pytest.approx(gaps[0] * 20**1.5)

    def test_growth_is_flagged(self, monkeypatch):
        real = gap_report

        def shuffled(k, n):
            report = real(k, n)
            if n == 40:
                report = report.model_copy(update={"largest_gap": 0.9})
            return report

        monkeypatch.setattr("app.services.gaps.gap_report", shuffled)
        trend = largest_gap_trend(2, [20, 40])
        assert trend.violations == [40]
        assert not trend.non_increasing

    def test_empty_grid(self):
        with pytest.raises(ValidationException):
            largest_gap_trend(2, [])


class TestMinNonzeroDistance:
    """Test the certified minimum search."""

    def test_single_root(self):
        expr, cert = min_nonzero_distance(1, 5)
        assert expr.radicands == (5,)
        assert cert.nearest_integer == 2

    @pytest.mark.parametrize("k,n", [(2, 30), (3, 12)])
    def test_matches_brute_force(self, k, n):
        best = None
        for radicands in combinations_with_replacement(range(1, n + 1), k):
            cert = certified_distance(RootSumExpr.from_radicands(radicands))
            if cert.exactly_integer:
                continue
            distance = float(cert.distance_enclosure.midpoint)
            if best is None or distance < best:
                best = distance
        _, cert = min_nonzero_distance(k, n)
        assert float(cert.distance_enclosure.midpoint) == pytest.approx(best, rel=1e-9)

    @pytest.mark.parametrize("n", range(20, 201))
    def test_two_root_floor(self, n):
        _, cert = min_nonzero_distance(2, n)
        assert float(cert.distance_enclosure.lo) * n**1.5 >= TWO_ROOT_FLOOR

    @pytest.mark.parametrize("n", range(10, 41))
    def test_three_root_floor(self, n):
        _, cert = min_nonzero_distance(3, n)
        assert float(cert.distance_enclosure.lo) * n**3.5 >= THREE_ROOT_FLOOR

    def test_exact_tie_goes_to_smaller_tuple(self):
        first = ((1, 18), certified_distance(RootSumExpr.from_radicands((1, 18))))
        second = ((2, 8), certified_distance(RootSumExpr.from_radicands((2, 8))))
        assert _closer(first, second)
        assert not _closer(second, first)

    def test_needs_two_radicands(self):
        with pytest.raises(ValidationException):
            min_nonzero_distance(2, 1)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
