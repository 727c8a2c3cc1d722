"""
Integer utilities: perfect squares, squarefree decomposition, 64-bit
factorization, double factorials and binomials.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, NamedTuple, Optional

import gmpy2

from app.exceptions.custom_exceptions import (
    FactorizationException,
    ValidationException,
)

_logger = logging.getLogger(__name__)

FACTORIZATION_LIMIT = 1 << 63
TRIAL_DIVISION_LIMIT = 10**6

# Deterministic Miller-Rabin witnesses for every n < 3.3 * 10**24
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class PerfectSquare(NamedTuple):
    is_square: bool
    root: Optional[int]


@dataclass(frozen=True)
class SquarefreeDecomposition:
    """``value = s**2 * d`` with ``d`` squarefree."""

    s: int
    d: int

    @property
    def value(self) -> int:
        return self.s * self.s * self.d


def is_perfect_square(a: int) -> PerfectSquare:
    if a < 1:
        raise ValidationException("is_perfect_square needs a >= 1", details={"a": a})
    if gmpy2.is_square(a):
        return PerfectSquare(True, int(gmpy2.isqrt(a)))
    return PerfectSquare(False, None)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n below 2**64."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = gmpy2.powmod(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = gmpy2.powmod(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _brent_rho(n: int, c: int, max_iterations: int = 1 << 22) -> Optional[int]:
    """One deterministic Pollard-rho run (Brent's cycle detection) with f(x) = x^2 + c."""
    y, r, q = 2, 1, 1
    g = 1
    x = ys = y
    m = 128
    steps = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = int(gmpy2.gcd(q, n))
            k += m
        r *= 2
        steps += r
        if steps > max_iterations:
            return None
    if g == n:
        # Batched gcd overshot; back up one step at a time
        while True:
            ys = (ys * ys + c) % n
            g = int(gmpy2.gcd(abs(x - ys), n))
            if g > 1:
                break
    return g if g != n else None


def _split(n: int) -> int:
    for c in range(1, 64):
        factor = _brent_rho(n, c)
        if factor is not None:
            return factor
    raise FactorizationException(
        "Pollard-rho failed to split a composite",
        details={"n": n},
    )


def _factor_large(n: int, factors: Dict[int, int]) -> None:
    stack = [n]
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            factors[m] = factors.get(m, 0) + 1
            continue
        root = gmpy2.isqrt(m)
        if root * root == m:
            stack.extend((int(root), int(root)))
            continue
        f = _split(m)
        stack.extend((f, m // f))


@lru_cache(maxsize=1 << 16)
def _factorize_cached(a: int) -> tuple:
    factors: Dict[int, int] = {}
    n = a
    while n % 2 == 0:
        factors[2] = factors.get(2, 0) + 1
        n //= 2
    p = 3
    while p <= TRIAL_DIVISION_LIMIT and p * p <= n:
        while n % p == 0:
            factors[p] = factors.get(p, 0) + 1
            n //= p
        p += 2
    if n > 1:
        if p * p > n:
            factors[n] = factors.get(n, 0) + 1
        else:
            _logger.debug("Trial division exhausted; handing %s to Pollard-rho", n)
            _factor_large(n, factors)
    return tuple(sorted(factors.items()))


def factorize(a: int) -> Dict[int, int]:
    """Prime factorization of ``1 <= a <= 2**63`` as ``{prime: exponent}``."""
    if a < 1:
        raise ValidationException("factorize needs a >= 1", details={"a": a})
    if a > FACTORIZATION_LIMIT:
        raise FactorizationException(
            "Radicand exceeds the supported factorization range",
            details={"a": a, "limit": FACTORIZATION_LIMIT},
        )
    return dict(_factorize_cached(a))


def squarefree_decompose(a: int) -> SquarefreeDecomposition:
    s, d = 1, 1
    for p, e in factorize(a).items():
        s *= p ** (e // 2)
        if e % 2:
            d *= p
    return SquarefreeDecomposition(s=s, d=d)


def double_factorial(m: int) -> int:
    """``m!!`` with the empty-product convention ``(-1)!! = 0!! = 1``."""
    if m < -1:
        raise ValidationException("double_factorial needs m >= -1", details={"m": m})
    if m <= 0:
        return 1
    return int(gmpy2.double_fac(m))


def binomial(m: int, i: int) -> int:
    if m < 0:
        raise ValidationException("binomial needs m >= 0", details={"m": m})
    if i < 0 or i > m:
        return 0
    return int(gmpy2.comb(m, i))
