"""
Searches for record-small nonzero ``||sum(sqrt(a_i)) - y||``.

Both engines filter k-multisets with 64-bit fractional keys and hand every
surviving tuple to rootsum for certification, so they emit exactly the same
records; only the filtering strategy differs.
"""

from __future__ import annotations

import logging
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from math import ceil
from typing import Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from app.core.config import get_settings
from app.core.metrics import search_candidates_total, search_records_total
from app.exceptions.custom_exceptions import (
    PrecisionLimitException,
    ValidationException,
    raise_resource_limit_error,
)
from app.models.domain import SearchMethod, Shard, ShardResult, ShardTask
from app.models.schemas import NearIntegerRecord, SearchConfig
from app.repositories.record_repository import ShardProgressRepository
from app.services.bigfix import Interval, sqrt_enclosure
from app.services.enumeration import (
    KEY_MODULUS,
    first_element_block,
    multiset_count,
    multiset_table,
    shard_ranges,
    tail_offset,
    unrank,
)
from app.services.numbertheory import binomial, double_factorial
from app.services.rootsum import (
    DistanceCertificate,
    RootSumExpr,
    Term,
    canonicalize,
    certified_distance,
    certify_within,
    evaluate_form,
)
from app.workers.shards import run_shards

_logger = logging.getLogger(__name__)

_HALF_CIRCLE = KEY_MODULUS >> 1


class KeyWindow(NamedTuple):
    target: int
    width: int
    full: bool


class BinomialCheck(NamedTuple):
    m: int
    n: int
    lhs: Interval
    rhs: Interval
    holds: bool
    precision_bits: int


def key_window(threshold: Fraction, offset: Fraction, k: int) -> KeyWindow:
    """Key-space window that contains every tuple within ``threshold`` of ``y``."""
    threshold_key = ceil(threshold * KEY_MODULUS)
    # Each of the k keys is floored and y is floored once
    width = threshold_key + k + 2
    target = int(offset * KEY_MODULUS) % KEY_MODULUS
    return KeyWindow(target=target, width=width, full=width >= _HALF_CIRCLE)


def _near(keys: np.ndarray, window: KeyWindow) -> np.ndarray:
    if window.full:
        return np.ones(keys.shape, dtype=bool)
    forward = keys - np.uint64(window.target)
    width = np.uint64(window.width)
    return (forward <= width) | (forward >= np.uint64(KEY_MODULUS - window.width))


def record_from_certificate(
    expr: RootSumExpr, cert: DistanceCertificate, method: SearchMethod, n_max: int
) -> NearIntegerRecord:
    distance, radius = cert.distance_decimal(20)
    pairs = sorted(zip(expr.radicands, expr.signs))
    return NearIntegerRecord(
        radicands=[a for a, _ in pairs],
        signs=[s for _, s in pairs],
        k=expr.k,
        n_max=n_max,
        nearest_integer=cert.nearest_integer,
        distance=distance,
        radius=radius,
        precision_bits=cert.precision_bits,
        method=method,
        offset=str(cert.offset),
    )


def _certify(tuples: Iterable[Tuple[int, ...]], task: ShardTask) -> List[NearIntegerRecord]:
    records = []
    for radicands in sorted(set(tuples)):
        expr = RootSumExpr.from_radicands(radicands)
        cert = certify_within(expr, task.threshold, task.offset, task.precision_bits)
        if cert is None or cert.exactly_integer:
            continue
        records.append(record_from_certificate(expr, cert, task.method, task.n))
    return records


def _exhaustive_shard(task: ShardTask) -> ShardResult:
    window = key_window(task.threshold, task.offset, task.k)
    found: List[Tuple[int, ...]] = []
    for v in range(task.shard.start, task.shard.stop):
        offset, block = first_element_block(task.n, task.k, v)
        mask = _near(block.keys, window) & ~block.trivial
        for i in np.flatnonzero(mask):
            found.append((v,) + unrank(offset + int(i), task.n, task.k - 1))
    return ShardResult(task.shard.shard_id, len(found), _certify(found, task))


@lru_cache(maxsize=4)
def _sorted_half_table(n: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    table = multiset_table(n, j)
    order = np.argsort(table.keys, kind="stable")
    return table.keys[order], order


def _mitm_shard(task: ShardTask) -> ShardResult:
    k1 = (task.k + 1) // 2
    k2 = task.k - k1
    window = key_window(task.threshold, task.offset, task.k)
    sorted_keys, order = _sorted_half_table(task.n, k1)
    half = multiset_table(task.n, k1)
    tail = multiset_table(task.n, k2)

    first = tail_offset(task.n, k2, task.shard.start)
    last = tail_offset(task.n, k2, task.shard.stop)
    tail_keys = tail.keys[first:last]
    centers = np.uint64(window.target) - tail_keys
    width = np.uint64(window.width)
    low = centers - width
    high = centers + width
    wrapped = low > high
    left = np.searchsorted(sorted_keys, low, side="left")
    right = np.searchsorted(sorted_keys, high, side="right")
    size = sorted_keys.size

    found: Set[Tuple[int, ...]] = set()
    hits = np.flatnonzero(wrapped | (right > left))
    for j in hits:
        if wrapped[j]:
            positions = list(range(int(left[j]), size)) + list(range(0, int(right[j])))
        else:
            positions = range(int(left[j]), int(right[j]))
        b_index = first + int(j)
        b_tuple = unrank(b_index, task.n, k2)
        for position in positions:
            a_index = int(order[position])
            if half.trivial[a_index] and tail.trivial[b_index]:
                continue
            found.add(tuple(sorted(unrank(a_index, task.n, k1) + b_tuple)))
    return ShardResult(task.shard.shard_id, len(found), _certify(found, task))


def _merge(results: Sequence[ShardResult], record_limit: Optional[int]) -> List[NearIntegerRecord]:
    unique = {}
    for result in results:
        for record in result.records:
            unique.setdefault(record.sort_key(), record)
    records = sorted(unique.values(), key=NearIntegerRecord.sort_key)
    if record_limit is not None and len(records) > record_limit:
        best = sorted(records, key=lambda r: (Decimal(r.distance), r.sort_key()))[:record_limit]
        records = sorted(best, key=NearIntegerRecord.sort_key)
    return records


def _run_sharded(
    method: SearchMethod,
    cfg: SearchConfig,
    task_fn,
    shards: List[Shard],
    parallelism: int,
    progress: Optional[ShardProgressRepository],
) -> List[NearIntegerRecord]:
    tasks = [
        ShardTask(
            method=method,
            k=cfg.k,
            n=cfg.n_max,
            shard=shard,
            threshold=cfg.threshold,
            offset=cfg.target_offset,
            precision_bits=cfg.precision_bits,
        )
        for shard in shards
    ]
    fingerprint = cfg.fingerprint(method)
    completed = progress.load(fingerprint) if progress is not None else {}
    pending = [task for task in tasks if task.shard.shard_id not in completed]

    def on_result(index: int, result: ShardResult) -> None:
        completed[result.shard_id] = result
        if progress is not None:
            progress.save_shard(fingerprint, result)

    run_shards(task_fn, pending, parallelism, on_result)
    results = [completed[shard.shard_id] for shard in shards]

    candidates = sum(result.candidates for result in results)
    records = _merge(results, cfg.record_limit)
    search_candidates_total.labels(method=method).inc(candidates)
    search_records_total.labels(method=method).inc(len(records))
    _logger.info(
        "Search finished",
        extra={
            "event": "search_finished",
            "method": method,
            "shards": len(shards),
            "candidates": candidates,
            "records": len(records),
        },
    )
    return records


def exhaustive_search(
    cfg: SearchConfig,
    parallelism: int = 1,
    progress: Optional[ShardProgressRepository] = None,
) -> List[NearIntegerRecord]:
    """Every non-trivial k-multiset over ``1..n_max`` within ``threshold`` of ``N + y``."""
    estimate = multiset_count(cfg.n_max, cfg.k)
    limit = get_settings().SEARCH_MAX_TUPLES
    if estimate > limit:
        raise_resource_limit_error("Exhaustive search", estimate, limit, {"k": cfg.k, "n": cfg.n_max})
    shards = shard_ranges(cfg.n_max, cfg.k, cfg.shard_count)
    return _run_sharded("exhaustive", cfg, _exhaustive_shard, shards, parallelism, progress)


def meet_in_the_middle(
    cfg: SearchConfig,
    parallelism: int = 1,
    progress: Optional[ShardProgressRepository] = None,
) -> List[NearIntegerRecord]:
    """
    Split ``k = k1 + k2`` with ``k1 = ceil(k/2)``; sort the k1 key table once and
    look up each k2 key's complement window by binary search.
    """
    if cfg.k < 2:
        raise ValidationException("meet_in_the_middle needs k >= 2", details={"k": cfg.k})
    k1 = (cfg.k + 1) // 2
    estimate = multiset_count(cfg.n_max, k1)
    limit = get_settings().MITM_MAX_TABLE_ENTRIES
    if estimate > limit:
        raise_resource_limit_error("Half-sum table", estimate, limit, {"k1": k1, "n": cfg.n_max})
    if key_window(cfg.threshold, cfg.target_offset, cfg.k).full:
        _logger.warning(
            "Threshold covers the whole circle; matching degenerates to enumeration",
            extra={"event": "mitm_full_window", "threshold": str(cfg.threshold)},
        )
        return exhaustive_search(cfg, parallelism, progress)
    shards = shard_ranges(cfg.n_max, cfg.k - k1, cfg.shard_count)
    return _run_sharded("mitm", cfg, _mitm_shard, shards, parallelism, progress)


def family_k2(a: int, precision_bits: Optional[int] = None) -> NearIntegerRecord:
    """``sqrt(a^2 + 1) + sqrt(a^2 - 1) = 2a - 1/(4a^3) + o(a^-3)``."""
    if a < 2:
        raise ValidationException("family_k2 needs a >= 2", details={"a": a})
    expr = RootSumExpr.from_radicands([a * a + 1, a * a - 1])
    cert = certified_distance(expr, precision_bits=precision_bits)
    return record_from_certificate(expr, cert, "family_k2", a * a + 1)


def family_k3_radicands(t: int) -> Tuple[int, int, int]:
    return (t - 1) ** 2 + 2, (t + 1) ** 2 + 2, (2 * t) ** 2 - 8


def family_k3(t: int, precision_bits: Optional[int] = None) -> NearIntegerRecord:
    """Three-root family whose distance behaves like ``4 / t^5``."""
    if t < 3:
        raise ValidationException("family_k3 needs t >= 3", details={"t": t})
    radicands = family_k3_radicands(t)
    expr = RootSumExpr.from_radicands(radicands)
    cert = certified_distance(expr, precision_bits=precision_bits)
    return record_from_certificate(expr, cert, "family_k3", max(radicands))


def binomial_expression(m: int, n: int) -> RootSumExpr:
    """``sum_i C(m, i) (-1)^i sqrt(n + i)`` with each coefficient spelled out as copies."""
    terms = []
    for i in range(m + 1):
        terms.extend([Term(n + i, -1 if i % 2 else 1)] * binomial(m, i))
    return RootSumExpr(tuple(terms))


def _binomial_rhs(m: int, n: int, precision_bits: int) -> Interval:
    """Enclosure of ``(2m - 3)!! * sqrt(n) / (2^m * n^m)``."""
    root = sqrt_enclosure(n, precision_bits)
    numerator = double_factorial(2 * m - 3)
    denominator = (1 << m) * n**m
    scale = precision_bits + denominator.bit_length()
    return Interval.from_bounds(
        root.lo.to_fraction() * numerator / denominator,
        root.hi.to_fraction() * numerator / denominator,
        scale,
    )


def binomial_cancellation(m: int, n: int, precision_bits: Optional[int] = None) -> BinomialCheck:
    """Certified check of ``|sum C(m,i)(-1)^i sqrt(n+i)| <= (2m-3)!! / (2^m n^(m - 1/2))``."""
    if m < 1:
        raise ValidationException("binomial_cancellation needs m >= 1", details={"m": m})
    if n < 1:
        raise ValidationException("binomial_cancellation needs n >= 1", details={"n": n})
    settings = get_settings()
    form = canonicalize(binomial_expression(m, n))
    p = precision_bits or settings.DEFAULT_PRECISION_BITS
    while True:
        lhs = abs(evaluate_form(form, p))
        rhs = _binomial_rhs(m, n, p)
        if lhs.hi <= rhs.lo:
            return BinomialCheck(m, n, lhs, rhs, True, p)
        if lhs.lo > rhs.hi:
            return BinomialCheck(m, n, lhs, rhs, False, p)
        if p >= settings.MAX_PRECISION_BITS:
            raise PrecisionLimitException(
                "Could not separate the two sides of the cancellation bound",
                details={"m": m, "n": n, "precision_bits": p},
            )
        p = min(2 * p, settings.MAX_PRECISION_BITS)


def binomial_record(check: BinomialCheck) -> NearIntegerRecord:
    expr = binomial_expression(check.m, check.n)
    cert = certified_distance(expr, precision_bits=check.precision_bits)
    return record_from_certificate(expr, cert, "binomial", check.n + check.m)


def run_search(
    method: SearchMethod,
    cfg: SearchConfig,
    parallelism: int = 1,
    progress: Optional[ShardProgressRepository] = None,
) -> List[NearIntegerRecord]:
    if method == "exhaustive":
        return exhaustive_search(cfg, parallelism, progress)
    if method == "mitm":
        return meet_in_the_middle(cfg, parallelism, progress)
    raise ValidationException(f"Unknown search engine {method!r}", details={"method": method})
