from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Literal, Optional

SearchMethod = Literal["exhaustive", "mitm", "family_k2", "family_k3", "binomial"]
Subcommand = Literal[
    "eval", "decide", "search", "expsum", "count", "gaps", "min-distance", "verify-known"
]
OutputFormat = Literal["json", "csv", "text"]


@dataclass(frozen=True)
class Shard:
    """Tuples whose first radicand lies in ``[start, stop)``."""

    shard_id: int
    start: int
    stop: int
    size: int


@dataclass(frozen=True)
class ShardTask:
    method: SearchMethod
    k: int
    n: int
    shard: Shard
    threshold: Fraction
    offset: Fraction
    precision_bits: Optional[int] = None


@dataclass
class ShardResult:
    shard_id: int
    candidates: int
    records: List = field(default_factory=list)  # NearIntegerRecord
