"""
Exponential sums ``S(l, n) = sum_{a<=n} e(l * sqrt(a))``, the hat kernel and
the Fourier side of the counting identity

    sum_{tuples} h(sum sqrt(a_i) - y) = sum_l h^(l) e(-l y) S(l, n)^k.

Phases are reduced mod 1 in integer fixed point before any trigonometry; the
floating-point part of every result carries an explicit error radius.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, NamedTuple, Optional, Sequence, Union

import gmpy2
import numpy as np

from app.core.config import get_settings
from app.core.metrics import expsum_terms_total
from app.exceptions.custom_exceptions import (
    PreconditionException,
    ValidationException,
    raise_resource_limit_error,
)
from app.models.schemas import IdentityCheck, BoundRow
from app.services.enumeration import fractional_keys
from app.workers.shards import run_shards

_logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * math.pi
# Per-term budget for numpy cos/sin and the float conversion of the phase
_TRIG_ERROR = 2.0**-48
_DOUBLE_EPS = 2.0**-53
_CHUNK_ELEMENTS = 1 << 22

Real = Union[float, int, Fraction]


@dataclass(frozen=True)
class ExpSumValue:
    ell: int
    n: int
    re: float
    im: float
    err_radius: float

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def abs(self) -> float:
        return math.hypot(self.re, self.im)


@dataclass(frozen=True)
class HatKernel:
    """``h(x) = max(1 - s * ||x||, 0)`` on the circle."""

    s: float

    def __post_init__(self) -> None:
        if not self.s > 1:
            raise ValidationException("HatKernel needs s > 1", details={"s": self.s})

    @property
    def support_radius(self) -> float:
        return 1.0 / self.s


class CountResult(NamedTuple):
    direct_weighted: float
    direct_cardinality: int
    trivial_count: int
    direct_error: float


class FourierCount(NamedTuple):
    estimate: float
    tail_bound: float
    phase_error: float
    nonzero_contribution: float


def _phase_floats(phases: Sequence[int], bits: int) -> np.ndarray:
    """Integer phases in ``[0, 2**bits)`` to floats in ``[0, 1)``, truncating to 53 bits."""
    shift = max(bits - 53, 0)
    scale = 2.0 ** -(bits - shift)
    return np.array([p >> shift for p in phases], dtype=np.float64) * scale


def exp_sum_over(
    ell: int, radicands: Iterable[int], precision_bits: Optional[int] = None
) -> ExpSumValue:
    """``sum e(ell * sqrt(a))`` over the given radicands with a certified error radius."""
    settings = get_settings()
    precision_bits = settings.EXPSUM_PRECISION_BITS if precision_bits is None else precision_bits
    if not 0 <= precision_bits <= 48:
        raise ValidationException(
            "exp_sum precision_bits must lie in [0, 48]",
            details={"precision_bits": precision_bits},
        )
    radicands = list(radicands)
    if any(a < 1 for a in radicands):
        raise ValidationException("Radicands must be positive integers")
    count = len(radicands)
    expsum_terms_total.inc(count)
    if ell == 0:
        return ExpSumValue(ell=0, n=count, re=float(count), im=0.0, err_radius=0.0)

    bits = precision_bits + settings.EXPSUM_GUARD_BITS + abs(ell).bit_length()
    modulus = 1 << bits
    # floor(sqrt(a) * 2**bits) is within one unit below the true value
    phases = [(ell * int(gmpy2.isqrt(a << (2 * bits)))) % modulus for a in radicands]
    turns = _phase_floats(phases, bits)
    angles = _TWO_PI * turns
    re = math.fsum(np.cos(angles).tolist())
    im = math.fsum(np.sin(angles).tolist())
    per_term = _TWO_PI * (abs(ell) * 2.0**-bits + _DOUBLE_EPS) + _TRIG_ERROR
    err_radius = count * per_term + 2 * _DOUBLE_EPS * count
    return ExpSumValue(ell=ell, n=count, re=re, im=im, err_radius=err_radius)


def exp_sum(ell: int, n: int, precision_bits: Optional[int] = None) -> ExpSumValue:
    if n < 1:
        raise ValidationException("exp_sum needs n >= 1", details={"n": n})
    return exp_sum_over(ell, range(1, n + 1), precision_bits)


def hat_eval(kernel: HatKernel, x: Real) -> float:
    x = float(x)
    distance = abs(x - round(x))
    return max(1.0 - kernel.s * distance, 0.0)


def hat_fourier(kernel: HatKernel, ell: int) -> float:
    """``1/s`` at 0, otherwise ``s sin^2(pi l / s) / (pi^2 l^2)``."""
    if ell == 0:
        return 1.0 / kernel.s
    if float(kernel.s).is_integer() and ell % int(kernel.s) == 0:
        return 0.0
    return kernel.s * math.sin(math.pi * ell / kernel.s) ** 2 / (math.pi**2 * ell * ell)


def hat_fourier_array(kernel: HatKernel, ells: np.ndarray) -> np.ndarray:
    ells = np.asarray(ells, dtype=np.int64)
    safe = np.where(ells == 0, 1, ells).astype(np.float64)
    values = kernel.s * np.sin(np.pi * safe / kernel.s) ** 2 / (np.pi**2 * safe * safe)
    if float(kernel.s).is_integer():
        values = np.where(ells % int(kernel.s) == 0, 0.0, values)
    return np.where(ells == 0, 1.0 / kernel.s, values)


def _check_count_size(k: int, n: int) -> None:
    if k < 1 or n < 1:
        raise ValidationException("Counting needs k >= 1 and n >= 1", details={"k": k, "n": n})
    limit = get_settings().COUNT_MAX_TUPLES
    if n**k > limit:
        raise_resource_limit_error("Direct counting", n**k, limit, {"k": k, "n": n})


def count_near(k: int, n: int, kernel: HatKernel, y: Real = 0.0) -> CountResult:
    """
    Direct side of the counting identity over ordered k-tuples from ``1..n``.

    ``direct_error`` bounds the float error of the weighted sum.
    """
    _check_count_size(k, n)
    y = float(y)
    roots = np.sqrt(np.arange(1, n + 1, dtype=np.float64))
    outer = np.zeros(1, dtype=np.float64)
    for _ in range(k - 1):
        outer = (outer[:, None] + roots[None, :]).ravel()

    chunk = max(_CHUNK_ELEMENTS // n, 1)
    partial_weights: List[float] = []
    cardinality = 0
    for start in range(0, outer.size, chunk):
        sums = outer[start:start + chunk, None] + roots[None, :] - y
        distance = np.abs(sums - np.rint(sums))
        partial_weights.append(float(np.maximum(1.0 - kernel.s * distance, 0.0).sum()))
        cardinality += int(np.count_nonzero(distance <= kernel.support_radius))

    total = n**k
    trivial = math.isqrt(n) ** k if y == 0 else 0
    sum_error = (k + 1) * k * math.sqrt(n) * 2.0**-52
    direct_error = total * (kernel.s * sum_error + 2.0**-50)
    return CountResult(
        direct_weighted=math.fsum(partial_weights),
        direct_cardinality=cardinality,
        trivial_count=trivial,
        direct_error=direct_error,
    )


def fourier_count(k: int, n: int, kernel: HatKernel, L: int, y: Real = 0.0) -> FourierCount:
    """
    ``n^k / s + 2 Re sum_{l=1}^{L} h^(l) e(-l y) S(l, n)^k`` with the tail bound
    ``n^k * 2s / (pi^2 L)`` and an accumulated phase-error bound.
    """
    if L < kernel.s:
        raise PreconditionException(
            "fourier_count needs L >= s", details={"L": L, "s": kernel.s}
        )
    if k < 1 or n < 1:
        raise ValidationException("Counting needs k >= 1 and n >= 1", details={"k": k, "n": n})
    y = float(y)
    keys = np.asarray(fractional_keys(n).keys[1:])
    total = float(n) ** k

    block = max(_CHUNK_ELEMENTS // n, 1)
    contributions: List[float] = []
    error_terms: List[float] = []
    for start in range(1, L + 1, block):
        ells = np.arange(start, min(start + block, L + 1), dtype=np.uint64)
        # l * key wraps mod 2^64, which is l * frac(sqrt(a)) mod 1
        phases = np.multiply.outer(ells, keys) >> np.uint64(11)
        angles = _TWO_PI * (phases.astype(np.float64) * 2.0**-53)
        sums = np.cos(angles).sum(axis=1) + 1j * np.sin(angles).sum(axis=1)
        ell_float = ells.astype(np.float64)
        coefficients = hat_fourier_array(kernel, ells.astype(np.int64))
        shift_turns = np.mod(ell_float * y, 1.0)
        rotation = np.exp(-1j * _TWO_PI * shift_turns)
        contributions.append(float(np.real(coefficients * rotation * sums**k).sum()))

        # |S - S~| per l from key truncation, the 53-bit phase cut and trig
        delta = n * (_TWO_PI * (ell_float * 2.0**-64 + _DOUBLE_EPS) + _TRIG_ERROR)
        power_error = k * (n + delta) ** (k - 1) * delta
        rotation_error = total * _TWO_PI * ell_float * abs(y) * _DOUBLE_EPS
        error_terms.append(float((coefficients * (power_error + rotation_error)).sum()))
        expsum_terms_total.inc(int(ells.size) * n)

    zero_mode = total / kernel.s
    nonzero = 2.0 * math.fsum(contributions)
    estimate = zero_mode + nonzero
    phase_error = 2.0 * math.fsum(error_terms) + 2.0 * (L + 1) * total * 2.0**-50
    tail_bound = total * 2.0 * kernel.s / (math.pi**2 * L)

    _logger.info(
        "Fourier count evaluated",
        extra={
            "event": "fourier_count",
            "k": k,
            "n": n,
            "s": kernel.s,
            "L": L,
            "nonzero_contribution_sign": "positive" if nonzero > 0 else "non-positive",
        },
    )
    return FourierCount(
        estimate=estimate,
        tail_bound=tail_bound,
        phase_error=phase_error,
        nonzero_contribution=nonzero,
    )


def identity_check(k: int, n: int, s: float, L: int, y: Real = 0.0) -> IdentityCheck:
    """Both sides of the counting identity and whether they agree within the certified slack."""
    kernel = HatKernel(s)
    direct = count_near(k, n, kernel, y)
    fourier = fourier_count(k, n, kernel, L, y)
    discrepancy = abs(direct.direct_weighted - fourier.estimate)
    allowed = fourier.tail_bound + fourier.phase_error + direct.direct_error
    return IdentityCheck(
        k=k,
        n=n,
        s=float(s),
        L=L,
        y=float(y),
        direct_weighted=direct.direct_weighted,
        direct_cardinality=direct.direct_cardinality,
        trivial_count=direct.trivial_count,
        estimate=fourier.estimate,
        nonzero_contribution=fourier.nonzero_contribution,
        tail_bound=fourier.tail_bound,
        phase_error=fourier.phase_error,
        discrepancy=discrepancy,
        holds=discrepancy <= allowed,
    )


def van_der_corput_shape(ell: int, n: int, derivatives: int = 5) -> float:
    """
    Dyadic-block shape ``sum_m (F^u m^-v + F^-1) m`` with ``F = l sqrt(m)``,
    ``u = 1/(2^R - 2)``, ``v = R/(2^R - 2)``. Constants omitted.
    """
    if ell == 0:
        return float(n)
    u = 1.0 / (2**derivatives - 2)
    v = derivatives / (2**derivatives - 2)
    total = 0.0
    m = 1
    while m <= n:
        F = abs(ell) * math.sqrt(m)
        total += (F**u * m**-v + 1.0 / F) * m
        m *= 2
    return total


def _bound_row(task) -> BoundRow:
    ell, n, precision_bits = task
    value = exp_sum(ell, n, precision_bits)
    return BoundRow(
        ell=ell,
        n=n,
        re=value.re,
        im=value.im,
        abs=value.abs,
        err_radius=value.err_radius,
        vdc_shape=n ** (59 / 60),
        eph_shape=math.sqrt(n),
        vdc_dyadic_shape=van_der_corput_shape(ell, n),
    )


def bound_probe(
    n: int,
    ell_grid: Sequence[int],
    parallelism: int = 1,
    precision_bits: Optional[int] = None,
) -> List[BoundRow]:
    """Empirical ``|S(l, n)|`` next to the bound shapes; rows in grid order."""
    if n < 1:
        raise ValidationException("bound_probe needs n >= 1", details={"n": n})
    for ell in ell_grid:
        if ell < 0:
            raise ValidationException("ell grid values must be non-negative", details={"ell": ell})
    tasks = [(int(ell), n, precision_bits) for ell in ell_grid]
    return run_shards(_bound_row, tasks, parallelism)
