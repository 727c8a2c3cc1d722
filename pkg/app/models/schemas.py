from __future__ import annotations

import hashlib
import json
from decimal import Decimal
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from app.core.config import get_settings
from app.models.domain import OutputFormat, SearchMethod, Subcommand


def parse_rational(value: Any) -> Fraction:
    """Accept ``Fraction``, ints, decimal strings and ``"p/q"`` strings; floats are taken exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, float, Decimal)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ValueError(f"not a rational number: {value!r}") from e
    raise ValueError(f"not a rational number: {value!r}")


class SearchConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(..., ge=1)
    n_max: int = Field(..., ge=1)
    threshold: Fraction
    target_offset: Fraction = Fraction(0)
    shard_count: int = Field(default=1, ge=1)
    record_limit: Optional[int] = Field(default=None, ge=1)
    precision_bits: Optional[int] = Field(default=None, ge=1)

    @field_validator("threshold", "target_offset", mode="before")
    @classmethod
    def _to_fraction(cls, value: Any) -> Fraction:
        return parse_rational(value)

    @field_validator("threshold")
    @classmethod
    def _positive_threshold(cls, value: Fraction) -> Fraction:
        if value <= 0:
            raise ValueError("threshold must be positive")
        return value

    @field_validator("target_offset")
    @classmethod
    def _offset_in_unit_interval(cls, value: Fraction) -> Fraction:
        if not 0 <= value < 1:
            raise ValueError("target offset y must lie in [0, 1)")
        return value

    @field_serializer("threshold", "target_offset")
    def _fraction_to_str(self, value: Fraction) -> str:
        return str(value)

    def fingerprint(self, method: SearchMethod) -> str:
        """Identity of a run for resuming; record_limit is applied after merging."""
        payload = self.model_dump(exclude={"record_limit"})
        payload["method"] = method
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class NearIntegerRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    radicands: List[int]
    signs: List[int]
    k: int
    n_max: int
    nearest_integer: int
    distance: str
    radius: str
    precision_bits: int
    method: SearchMethod
    offset: str = "0"

    @field_validator("distance")
    @classmethod
    def _positive_distance(cls, value: str) -> str:
        if Decimal(value) <= 0:
            raise ValueError("records never hold exact integers")
        return value

    def sort_key(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        return tuple(self.radicands), tuple(self.signs)

    def to_json_line(self) -> str:
        payload = {
            "radicands": [str(a) for a in self.radicands],
            "signs": [str(s) for s in self.signs],
            "k": str(self.k),
            "n_max": str(self.n_max),
            "nearest_integer": str(self.nearest_integer),
            "distance": self.distance,
            "radius": self.radius,
            "precision_bits": str(self.precision_bits),
            "method": self.method,
            "offset": self.offset,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "NearIntegerRecord":
        return cls.model_validate(json.loads(line))


class RunConfig(BaseModel):
    subcommand: Subcommand
    precision_bits: int = Field(default_factory=lambda: get_settings().DEFAULT_PRECISION_BITS)
    parallelism: int = Field(default=1, ge=1)
    output_path: Optional[str] = None
    format: OutputFormat = "text"

    @field_validator("precision_bits")
    @classmethod
    def _check_precision(cls, value: int) -> int:
        minimum = get_settings().MIN_PRECISION_BITS
        if value < minimum:
            raise ValueError(f"precision_bits must be at least {minimum}")
        return value


class HistogramBucket(BaseModel):
    lower: str  # "0" for the bucket below the finest power of two
    upper: str
    count: int


class GapReport(BaseModel):
    k: int
    n: int
    point_count: int
    largest_gap: float
    largest_gap_flanks: Tuple[float, float]
    smallest_nonzero_element: Optional[float]
    smallest_nonzero_tuple: Optional[List[int]] = None
    histogram: List[HistogramBucket]
    large_gap_counts: Dict[str, int] = Field(default_factory=dict)
    reference_shapes: Dict[str, float] = Field(default_factory=dict)
    merged_points: int = 0


class GapTrendPoint(BaseModel):
    n: int
    largest_gap: float
    scaled_gap: float  # largest_gap * n^1.5


class GapTrend(BaseModel):
    k: int
    points: List[GapTrendPoint]
    violations: List[int] = Field(default_factory=list)
    non_increasing: bool = True


class BoundRow(BaseModel):
    ell: int
    n: int
    re: float
    im: float
    abs: float
    err_radius: float
    vdc_shape: float
    eph_shape: float
    vdc_dyadic_shape: float


class IdentityCheck(BaseModel):
    k: int
    n: int
    s: float
    L: int
    y: float
    direct_weighted: float
    direct_cardinality: int
    trivial_count: int
    estimate: float
    nonzero_contribution: float
    tail_bound: float
    phase_error: float
    discrepancy: float
    holds: bool
