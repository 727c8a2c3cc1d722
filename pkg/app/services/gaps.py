"""
Gap structure of ``A = {sqrt(a_1) + ... + sqrt(a_k) mod 1 : 1 <= a_i <= n}``.

Points are sorted by 64-bit keys. Neighbours closer than ``2**-60`` are
re-compared exactly: two tuples give the same point iff the difference of
their sums is an integer, which the canonical radical form decides. Distinct
points that close keep the order of their keys, and their gap is known to
key resolution only.
"""

from __future__ import annotations

import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.config import get_settings
from app.exceptions.custom_exceptions import ValidationException, raise_resource_limit_error
from app.models.schemas import GapReport, GapTrend, GapTrendPoint, HistogramBucket
from app.services.enumeration import (
    KEY_MODULUS,
    first_element_block,
    multiset_count,
    multiset_table,
    unrank,
    wrap_distance,
)
from app.services.rootsum import (
    DistanceCertificate,
    RootSumExpr,
    certified_distance,
    combine,
    is_integer,
    side_of_nearest,
    sign,
)

_logger = logging.getLogger(__name__)

# Keys closer than 2^-60 are compared exactly
CLOSE_UNITS = 1 << 4
FINEST_BUCKET = -60
LARGE_GAP_FACTORS = (1, 10, 100)


def reference_shapes(k: int, n: int) -> Dict[str, float]:
    """Bound shapes without constants, for comparison against measured gaps and minima."""
    return {
        "single_root": n**-0.5,
        "two_roots": n**-1.5,
        "three_roots": n**-3.5,
        "conjugate_lower": n ** (0.5 - 2 ** (k - 1)),
        "pigeonhole": n ** (0.5 - k),
        "local_cancellation": n ** (-2 * k + 1.5),
        "random_model": float(n) ** -k,
        "exponent_pair": n ** (-k / 2),
    }


def _check_size(k: int, n: int, limit: int, what: str) -> None:
    if k < 1 or n < 1:
        raise ValidationException(f"{what} needs k >= 1 and n >= 1", details={"k": k, "n": n})
    estimate = multiset_count(n, k)
    if estimate > limit:
        raise_resource_limit_error(what, estimate, limit, {"k": k, "n": n})


def _same_point(first: Tuple[int, ...], second: Tuple[int, ...]) -> bool:
    difference = combine(
        [(1, RootSumExpr.from_radicands(first)), (-1, RootSumExpr.from_radicands(second))]
    )
    return is_integer(difference).is_integer


def _merge_close(sorted_keys: np.ndarray, order: np.ndarray, n: int, k: int) -> np.ndarray:
    """Mask of points to keep after exact comparison of near-coincident neighbours."""
    keep = np.ones(sorted_keys.size, dtype=bool)
    if sorted_keys.size < 2:
        return keep
    close = np.flatnonzero(np.diff(sorted_keys) <= np.uint64(CLOSE_UNITS))
    cluster: List[int] = []
    previous = -2
    for i in close:
        i = int(i)
        if i != previous + 1:
            cluster = [i]
        candidate = unrank(int(order[i + 1]), n, k)
        if any(_same_point(unrank(int(order[j]), n, k), candidate) for j in cluster):
            keep[i + 1] = False
        else:
            cluster.append(i + 1)
        previous = i
    return keep


def _histogram(gaps: np.ndarray, whole_circle: bool) -> List[HistogramBucket]:
    """Counts per power-of-two bucket ``[2^e, 2^(e+1))`` for ``e`` in ``-60..-1``, plus ``[0, 2^-60)``."""
    ordered = np.sort(gaps)
    edges = [1 << (64 + e) for e in range(FINEST_BUCKET, 0)]
    positions = [int(np.searchsorted(ordered, np.uint64(edge), side="left")) for edge in edges]
    buckets = [HistogramBucket(lower="0", upper=f"2^{FINEST_BUCKET}", count=positions[0])]
    for index, e in enumerate(range(FINEST_BUCKET, -1)):
        buckets.append(
            HistogramBucket(
                lower=f"2^{e}", upper=f"2^{e + 1}", count=positions[index + 1] - positions[index]
            )
        )
    top = ordered.size - positions[-1] + (1 if whole_circle else 0)
    buckets.append(HistogramBucket(lower="2^-1", upper="1", count=top))
    return buckets


class DistinctPoints(NamedTuple):
    points: np.ndarray  # sorted uint64 keys, one per distinct point
    order: np.ndarray  # multiset rank behind each sorted key
    kept_positions: np.ndarray  # positions in the sorted key table that survived merging
    merged: int


def distinct_points(k: int, n: int) -> DistinctPoints:
    """Sorted keys of the distinct points of A, exact coincidences merged."""
    _check_size(k, n, get_settings().GAPS_MAX_POINTS, "Gap report")
    table = multiset_table(n, k)
    order = np.argsort(table.keys, kind="stable")
    sorted_keys = table.keys[order]
    kept_positions = np.flatnonzero(_merge_close(sorted_keys, order, n, k))
    points = sorted_keys[kept_positions]
    return DistinctPoints(points, order, kept_positions, int(sorted_keys.size - points.size))


def circular_gaps(points: np.ndarray) -> np.ndarray:
    """
    Gaps between circularly consecutive keys, the wrap-around gap last.

    Empty for a single point, whose one gap is the whole circle.
    """
    if points.size < 2:
        return np.zeros(0, dtype=np.uint64)
    wrap_gap = KEY_MODULUS - int(points[-1]) + int(points[0])
    return np.append(np.diff(points), np.uint64(wrap_gap))


def gap_report(k: int, n: int) -> GapReport:
    points, order, kept_positions, merged = distinct_points(k, n)
    count = int(points.size)

    gaps = circular_gaps(points)
    inner = gaps[:-1]
    whole_circle = count == 1
    wrap_gap = KEY_MODULUS if whole_circle else int(gaps[-1])

    if whole_circle or wrap_gap >= int(inner.max(initial=0)):
        largest = wrap_gap
        flanks = (int(points[-1]) / KEY_MODULUS, 1.0 + int(points[0]) / KEY_MODULUS)
    else:
        at = int(np.argmax(inner))
        largest = int(inner[at])
        flanks = (int(points[at]) / KEY_MODULUS, int(points[at + 1]) / KEY_MODULUS)

    nonzero = np.flatnonzero(points > 0)
    smallest: Optional[float] = None
    smallest_tuple: Optional[List[int]] = None
    if nonzero.size:
        first = int(nonzero[0])
        smallest = int(points[first]) / KEY_MODULUS
        smallest_tuple = list(unrank(int(order[kept_positions[first]]), n, k))

    scale = n**-1.5
    gap_values = gaps.astype(np.float64) / KEY_MODULUS
    large_counts = {
        str(c): int(np.count_nonzero(gap_values > c * scale)) + (1 if whole_circle else 0)
        for c in LARGE_GAP_FACTORS
    }

    report = GapReport(
        k=k,
        n=n,
        point_count=count,
        largest_gap=largest / KEY_MODULUS,
        largest_gap_flanks=flanks,
        smallest_nonzero_element=smallest,
        smallest_nonzero_tuple=smallest_tuple,
        histogram=_histogram(gaps, whole_circle),
        large_gap_counts=large_counts,
        reference_shapes=reference_shapes(k, n),
        merged_points=merged,
    )
    _logger.info(
        "Gap report computed",
        extra={"event": "gap_report", "k": k, "n": n, "points": count, "merged": merged},
    )
    return report


def _closer(first: Tuple[Tuple[int, ...], DistanceCertificate],
            second: Tuple[Tuple[int, ...], DistanceCertificate]) -> bool:
    """Whether ``first`` has the smaller distance; exact ties go to the smaller tuple."""
    (tuple_a, cert_a), (tuple_b, cert_b) = first, second
    da, db = cert_a.distance_enclosure, cert_b.distance_enclosure
    if da.hi < db.lo:
        return True
    if db.hi < da.lo:
        return False
    # distance = side * (value - nearest); compare the two as one signed root sum
    side_a, side_b = side_of_nearest(cert_a), side_of_nearest(cert_b)
    difference = combine(
        [(side_a, RootSumExpr.from_radicands(tuple_a)), (-side_b, RootSumExpr.from_radicands(tuple_b))],
        constant=-side_a * cert_a.nearest_integer + side_b * cert_b.nearest_integer,
    )
    verdict = sign(difference).sign
    if verdict != 0:
        return verdict < 0
    return tuple_a < tuple_b


def min_nonzero_distance(k: int, n: int) -> Tuple[RootSumExpr, DistanceCertificate]:
    """The non-trivial k-multiset over ``1..n`` minimizing ``||sum sqrt(a_i)||``, certified."""
    _check_size(k, n, get_settings().SEARCH_MAX_TUPLES, "Minimum search")
    if n < 2:
        raise ValidationException("Every tuple over 1..1 is an exact integer", details={"n": n})
    # A key distance is within k + 1 units of the true distance
    margin = 2 * k + 4
    best = KEY_MODULUS
    pool: List[Tuple[int, Tuple[int, ...]]] = []
    for v in range(1, n + 1):
        offset, block = first_element_block(n, k, v)
        distance = wrap_distance(block.keys, 0)
        distance[block.trivial] = np.uint64(KEY_MODULUS - 1)
        local = int(distance.min())
        best = min(best, local)
        bound = min(best + margin, KEY_MODULUS - 1)
        for i in np.flatnonzero(distance <= np.uint64(bound)):
            if block.trivial[i]:
                continue
            pool.append((int(distance[i]), (v,) + unrank(offset + int(i), n, k - 1)))

    candidates = sorted(t for d, t in pool if d <= best + margin)
    winner: Optional[Tuple[Tuple[int, ...], DistanceCertificate]] = None
    for radicands in candidates:
        entry = (radicands, certified_distance(RootSumExpr.from_radicands(radicands)))
        if winner is None or _closer(entry, winner):
            winner = entry
    _logger.info(
        "Minimum distance certified",
        extra={"event": "min_distance", "k": k, "n": n, "candidates": len(candidates)},
    )
    return RootSumExpr.from_radicands(winner[0]), winner[1]


def largest_gap_trend(k: int, n_grid: Sequence[int]) -> GapTrend:
    """
    Largest gap along an increasing grid of ``n``.

    A is nested in ``n``, so the largest gap can only shrink; any increase is
    recorded as a violation and logged.
    """
    grid = sorted(set(n_grid))
    if not grid:
        raise ValidationException("The n grid is empty", details={"k": k})
    # Merged points are represented by one of their keys, which may move by a few units
    tolerance = (2 * k + 2) / KEY_MODULUS
    points: List[GapTrendPoint] = []
    violations: List[int] = []
    for n in grid:
        report = gap_report(k, n)
        if points and report.largest_gap > points[-1].largest_gap + tolerance:
            violations.append(n)
            _logger.warning(
                "Largest gap grew with n",
                extra={
                    "event": "gap_trend_violation",
                    "k": k,
                    "n": n,
                    "previous": points[-1].largest_gap,
                    "current": report.largest_gap,
                },
            )
        points.append(
            GapTrendPoint(
                n=n,
                largest_gap=report.largest_gap,
                scaled_gap=report.largest_gap * n**1.5,
            )
        )
    return GapTrend(k=k, points=points, violations=violations, non_increasing=not violations)
