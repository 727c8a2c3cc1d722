"""
Multiset enumeration and 64-bit fractional-part key tables.

j-multisets ``a_1 <= ... <= a_j`` over ``1..n`` are indexed in lexicographic
order. The table of their keys is built recursively: the multisets that
start with ``v`` are ``v`` followed by the tail of the (j-1)-table whose
entries start at ``v`` or later, and that tail is a contiguous suffix.

A key is ``floor(frac(sqrt(a)) * 2**64)`` as ``uint64``; tuple keys add with
wraparound, so a j-tuple key is within ``j`` units below the true
fractional part of the sum (mod 1).
"""

from __future__ import annotations

import logging
from functools import lru_cache
from math import comb
from typing import List, NamedTuple, Tuple

import gmpy2
import numpy as np

from app.models.domain import Shard

_logger = logging.getLogger(__name__)

KEY_BITS = 64
KEY_MODULUS = 1 << KEY_BITS
_KEY_MASK = KEY_MODULUS - 1


class MultisetTable(NamedTuple):
    keys: np.ndarray  # uint64
    trivial: np.ndarray  # bool, every radicand a perfect square


def multiset_count(n: int, j: int) -> int:
    return comb(n + j - 1, j)


def tail_count(n: int, j: int, v: int) -> int:
    """j-multisets over ``v..n``."""
    if j == 0:
        return 1
    return comb(n - v + j, j)


def tail_offset(n: int, j: int, v: int) -> int:
    """Index of the first j-multiset whose smallest element is at least ``v``."""
    return multiset_count(n, j) - tail_count(n, j, v)


def unrank(index: int, n: int, j: int) -> Tuple[int, ...]:
    """The j-multiset at lexicographic position ``index`` of the full table."""
    result = []
    low = 1
    for remaining in range(j, 0, -1):
        v = low
        while True:
            block = comb(n - v + remaining - 1, remaining - 1)
            if index < block:
                break
            index -= block
            v += 1
        result.append(v)
        low = v
    return tuple(result)


def fractional_key(a: int) -> int:
    return int(gmpy2.isqrt(a << (2 * KEY_BITS))) & _KEY_MASK


@lru_cache(maxsize=8)
def fractional_keys(n: int) -> MultisetTable:
    """Per-radicand keys, indexed by ``a`` (slot 0 unused)."""
    keys = np.zeros(n + 1, dtype=np.uint64)
    squares = np.zeros(n + 1, dtype=bool)
    for a in range(1, n + 1):
        _, remainder = gmpy2.isqrt_rem(a)
        squares[a] = remainder == 0
        keys[a] = fractional_key(a)
    keys.flags.writeable = False
    squares.flags.writeable = False
    return MultisetTable(keys, squares)


@lru_cache(maxsize=8)
def multiset_table(n: int, j: int) -> MultisetTable:
    """Keys of all j-multisets over ``1..n`` in lexicographic order."""
    if j == 0:
        keys = np.zeros(1, dtype=np.uint64)
        trivial = np.ones(1, dtype=bool)
    else:
        singles = fractional_keys(n)
        previous = multiset_table(n, j - 1)
        key_parts = []
        trivial_parts = []
        for v in range(1, n + 1):
            offset = tail_offset(n, j - 1, v)
            key_parts.append(previous.keys[offset:] + singles.keys[v])
            trivial_parts.append(previous.trivial[offset:] & singles.trivial[v])
        keys = np.concatenate(key_parts)
        trivial = np.concatenate(trivial_parts)
        _logger.debug(
            "Built multiset key table",
            extra={"event": "key_table", "n": n, "j": j, "entries": int(keys.size)},
        )
    keys.flags.writeable = False
    trivial.flags.writeable = False
    return MultisetTable(keys, trivial)


def first_element_block(n: int, k: int, v: int) -> Tuple[int, MultisetTable]:
    """Keys of the k-multisets starting with ``v``, plus the (k-1)-table offset of their tails."""
    singles = fractional_keys(n)
    previous = multiset_table(n, k - 1)
    offset = tail_offset(n, k - 1, v)
    return offset, MultisetTable(
        previous.keys[offset:] + singles.keys[v],
        previous.trivial[offset:] & singles.trivial[v],
    )


def shard_ranges(n: int, j: int, shard_count: int) -> List[Shard]:
    """
    Contiguous first-element ranges of roughly equal multiset counts.

    Boundaries depend on ``(n, j, shard_count)`` only.
    """
    # j-multisets starting with v number comb(n - v + j - 1, j - 1)
    weights = [comb(n - v + j - 1, j - 1) for v in range(1, n + 1)]
    total = sum(weights)
    shards: List[Shard] = []
    start = 1
    running = 0
    for shard_id in range(shard_count):
        if start > n:
            break
        target = total * (shard_id + 1) // shard_count
        last = shard_id == shard_count - 1
        stop = start
        size = 0
        while stop <= n and (last or size == 0 or running + weights[stop - 1] <= target):
            running += weights[stop - 1]
            size += weights[stop - 1]
            stop += 1
        shards.append(Shard(shard_id=len(shards), start=start, stop=stop, size=size))
        start = stop
    return shards


def wrap_distance(keys: np.ndarray, target: int) -> np.ndarray:
    """Circular distance between keys and ``target`` in key units."""
    forward = keys - np.uint64(target)
    return np.minimum(forward, np.uint64(0) - forward)
