"""
Regression suite over published near-integer examples and identities.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Tuple

from app.exceptions.custom_exceptions import BaseAppException
from app.services.rootsum import RootSumExpr, certified_distance, parse_terms, sign
from app.services.search import binomial_cancellation, family_k2, family_k3

_logger = logging.getLogger(__name__)

BINOMIAL_ORDERS = range(1, 7)
BINOMIAL_BASES = (10, 100, 1000, 10**6)


class CheckStatus(Enum):
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


@dataclass
class CheckResult:
    name: str
    status: CheckStatus
    observed: str = ""
    expected: str = ""
    detail: str = ""
    duration_ms: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status is CheckStatus.PASSED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "observed": self.observed,
            "expected": self.expected,
            "detail": self.detail,
            "duration_ms": self.duration_ms,
        }


def _within(observed: Fraction, expected: Fraction, relative: Fraction) -> bool:
    return abs(observed - expected) <= relative * abs(expected)


def _distance(text: str) -> Tuple[Fraction, RootSumExpr]:
    expr = parse_terms(text)
    cert = certified_distance(expr)
    return cert.distance_enclosure.midpoint.to_fraction(), expr


def check_three_root_classic() -> CheckResult:
    cert = certified_distance(parse_terms("+3 +20 +23"))
    value, radius = cert.value_decimal(20)
    ok = (
        cert.nearest_integer == 11
        and value.startswith("11.000018")
        and Decimal(radius) <= Decimal("1e-10")
    )
    return CheckResult(
        name="sqrt3+sqrt20+sqrt23",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"{value} ± {radius}",
        expected="11.000018..., radius <= 1e-10",
    )


def check_three_root_record() -> CheckResult:
    distance, _ = _distance("+11075 +27187 +68057")
    normalized = distance * 68057**3
    ok = _within(distance, Fraction("1.26e-15"), Fraction(1, 100)) and _within(
        normalized, Fraction("0.4"), Fraction(5, 100)
    )
    return CheckResult(
        name="sqrt11075+sqrt27187+sqrt68057",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"{float(distance):.6e} (x n^3 = {float(normalized):.4f})",
        expected="1.26e-15 within 1%, x n^3 ~ 0.4 within 5%",
    )


def check_six_term_cancellation() -> CheckResult:
    distance, _ = _distance("+29 +1097 +3153 -226 -2324 -987")
    ok = _within(distance, Fraction("2.84e-20"), Fraction(1, 100))
    return CheckResult(
        name="six-term signed sum",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"{float(distance):.6e}",
        expected="2.84e-20 within 1%",
    )


def check_family_k2(a: int, expected_ratio: Fraction, tolerance: Fraction) -> CheckResult:
    record = family_k2(a)
    ratio = Fraction(record.distance) * 4 * a**3
    ok = _within(ratio, expected_ratio, tolerance)
    return CheckResult(
        name=f"two-root family a={a}",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"distance {record.distance}, x 4a^3 = {float(ratio):.6f}",
        expected=f"x 4a^3 = {float(expected_ratio)} within {float(tolerance):.0%}",
    )


def check_family_k3(t: int) -> CheckResult:
    record = family_k3(t)
    ratio = Fraction(record.distance) * t**5 / 4
    ok = Fraction(9, 10) <= ratio <= Fraction(11, 10)
    return CheckResult(
        name=f"three-root family t={t}",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"distance {record.distance}, x t^5/4 = {float(ratio):.6f}",
        expected="x t^5/4 in [0.9, 1.1]",
    )


def check_binomial_grid() -> CheckResult:
    failures = []
    for m in BINOMIAL_ORDERS:
        for n in BINOMIAL_BASES:
            if not binomial_cancellation(m, n).holds:
                failures.append((m, n))
    return CheckResult(
        name="binomial cancellation bound",
        status=CheckStatus.FAILED if failures else CheckStatus.PASSED,
        observed=f"{len(failures)} violations" + (f": {failures}" if failures else ""),
        expected=f"holds for m in 1..6, n in {list(BINOMIAL_BASES)}",
    )


def check_comparison() -> CheckResult:
    decision = sign(parse_terms("+10 +11 -5 -18"))
    midpoint = decision.enclosure.midpoint.to_fraction()
    ok = decision.sign == 1 and _within(midpoint, Fraction("2e-4"), Fraction(1, 10))
    return CheckResult(
        name="sqrt10+sqrt11 vs sqrt5+sqrt18",
        status=CheckStatus.PASSED if ok else CheckStatus.FAILED,
        observed=f"sign {decision.sign:+d}, difference {float(midpoint):.6e}",
        expected="positive, ~2e-4 within 10%",
    )


KNOWN_CHECKS: List[Callable[[], CheckResult]] = [
    check_three_root_classic,
    check_three_root_record,
    check_six_term_cancellation,
    lambda: check_family_k2(100, Fraction(1), Fraction(1, 100)),
    lambda: check_family_k2(10, Fraction(1), Fraction(1, 100)),
    lambda: check_family_k3(100),
    check_binomial_grid,
    check_comparison,
]


def run_known_checks() -> List[CheckResult]:
    results = []
    for check in KNOWN_CHECKS:
        started = time.perf_counter()
        try:
            result = check()
        except BaseAppException as e:
            result = CheckResult(
                name=getattr(check, "__name__", "check"),
                status=CheckStatus.ERROR,
                detail=f"{e.error_code}: {e.message}",
            )
        result.duration_ms = int((time.perf_counter() - started) * 1000)
        _logger.info(
            "Known example checked",
            extra={"event": "known_check", "check": result.name, "status": result.status.value},
        )
        results.append(result)
    return results
