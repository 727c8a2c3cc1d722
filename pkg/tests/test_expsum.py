"""
Test suite for exponential sums, the hat kernel and the counting identity.
"""

import cmath
import math

import numpy as np
import pytest

from app.exceptions import PreconditionException, ResourceLimitException, ValidationException
from app.services.expsum import (
    HatKernel,
    bound_probe,
    count_near,
    exp_sum,
    exp_sum_over,
    fourier_count,
    hat_eval,
    hat_fourier,
    hat_fourier_array,
    identity_check,
    van_der_corput_shape,
)


def _direct_sum(ell, n):
    return sum(cmath.exp(2j * math.pi * ell * math.sqrt(a)) for a in range(1, n + 1))


class TestExpSum:
    """Test exponential sums over square roots."""

    def test_zero_frequency_is_exact(self):
        value = exp_sum(0, 37)
        assert value.re == 37.0 and value.im == 0.0
        assert value.err_radius == 0.0

    @pytest.mark.parametrize("ell", [1, 3, 17, 250])
    def test_agrees_with_direct_evaluation(self, ell):
        value = exp_sum(ell, 60)
        assert abs(value.value - _direct_sum(ell, 60)) <= value.err_radius + 1e-9

    def test_perfect_squares_contribute_one(self):
        value = exp_sum_over(7, [1, 4, 9, 16])
        assert value.re == pytest.approx(4.0, abs=value.err_radius)
        assert value.im == pytest.approx(0.0, abs=value.err_radius)

    @pytest.mark.parametrize("ell", [1, 7, 123])
    def test_negative_frequency_is_conjugate(self, ell):
        forward = exp_sum(ell, 200)
        backward = exp_sum(-ell, 200)
        gap = abs(backward.value - forward.value.conjugate())
        assert gap <= forward.err_radius + backward.err_radius

    def test_abs_never_exceeds_n(self):
        assert exp_sum(5, 200).abs <= 200 + exp_sum(5, 200).err_radius

    def test_precision_range(self):
        with pytest.raises(ValidationException):
            exp_sum(1, 10, precision_bits=49)
        with pytest.raises(ValidationException):
            exp_sum(1, 0)


class TestHatKernel:
    """Test the hat kernel and its Fourier coefficients."""

    def test_kernel_values(self):
        kernel = HatKernel(4)
        assert hat_eval(kernel, 0) == 1.0
        assert hat_eval(kernel, 3.125) == pytest.approx(0.5)
        assert hat_eval(kernel, 0.25) == 0.0
        assert kernel.support_radius == 0.25

    def test_fourier_coefficients(self):
        kernel = HatKernel(4)
        assert hat_fourier(kernel, 0) == 0.25
        assert hat_fourier(kernel, 8) == 0.0
        assert hat_fourier(kernel, 1) == pytest.approx(4 * 0.5 / math.pi**2)
        assert hat_fourier(kernel, -3) == hat_fourier(kernel, 3)

    def test_array_matches_scalar(self):
        kernel = HatKernel(2.5)
        ells = np.arange(0, 12)
        expected = [hat_fourier(kernel, int(ell)) for ell in ells]
        assert hat_fourier_array(kernel, ells) == pytest.approx(expected)

    def test_fourier_series_reconstructs_kernel(self):
        kernel = HatKernel(3)
        x = 0.1
        series = hat_fourier(kernel, 0) + 2 * sum(
            hat_fourier(kernel, ell) * math.cos(2 * math.pi * ell * x) for ell in range(1, 20000)
        )
        assert series == pytest.approx(hat_eval(kernel, x), abs=1e-4)

    def test_coefficients_sum_to_one(self):
        kernel = HatKernel(100)
        coefficients = hat_fourier_array(kernel, np.arange(1, 10**6 + 1))
        total = hat_fourier(kernel, 0) + 2 * float(coefficients.sum())
        assert 0.999 <= total <= 1.0 + 1e-12

    def test_kernel_needs_wide_enough_scale(self):
        with pytest.raises(ValidationException):
            HatKernel(1)


class TestCountingIdentity:
    """Test both sides of the counting identity."""

    def test_direct_count(self):
        result = count_near(2, 30, HatKernel(4))
        assert result.trivial_count == 25
        assert result.direct_cardinality >= result.trivial_count
        assert result.direct_weighted >= result.trivial_count - result.direct_error

    def test_no_trivial_count_with_offset(self):
        assert count_near(2, 30, HatKernel(4), y=0.5).trivial_count == 0

    @pytest.mark.parametrize("k,n,s,L,y", [(2, 30, 4, 400, 0.0), (2, 25, 3, 300, 0.5), (3, 12, 4, 400, 0.0)])
    def test_identity_holds(self, k, n, s, L, y):
        check = identity_check(k, n, s, L, y)
        assert check.holds
        assert check.discrepancy <= check.tail_bound + check.phase_error + 1e-6 * n**k

    @pytest.mark.parametrize("k,n,s,L", [(2, 50, 500, 10**6), (1, 100, 50, 10**5), (3, 20, 100, 10**6)])
    def test_identity_holds_at_long_cutoff(self, k, n, s, L):
        check = identity_check(k, n, s, L)
        assert check.holds
        assert check.tail_bound == pytest.approx(n**k * 2 * s / (math.pi**2 * L))

    def test_tail_shrinks_with_cutoff(self):
        short = fourier_count(2, 20, HatKernel(4), 100)
        long = fourier_count(2, 20, HatKernel(4), 1000)
        assert long.tail_bound < short.tail_bound

    def test_cutoff_below_scale_rejected(self):
        with pytest.raises(PreconditionException):
            fourier_count(2, 10, HatKernel(4), 3)

    def test_direct_count_size_limit(self, configure):
        configure(COUNT_MAX_TUPLES=100)
        with pytest.raises(ResourceLimitException):
            count_near(2, 11, HatKernel(4))


class TestBoundTable:
    """Test the exponential-sum bound table."""

    def test_rows_follow_grid_order(self):
        rows = bound_probe(50, [5, 0, 2])
        assert [row.ell for row in rows] == [5, 0, 2]
        assert rows[1].abs == 50.0
        assert all(row.eph_shape == pytest.approx(math.sqrt(50)) for row in rows)

    def test_parallel_rows_match_sequential(self):
        assert bound_probe(40, [1, 2, 3, 4], parallelism=2) == bound_probe(40, [1, 2, 3, 4])

    def test_every_sum_within_trivial_bound(self):
        n = 10**4
        rows = bound_probe(n, [0, 1, 2, 5, 10, 100, 1000, 10**4])
        assert len(rows) == 8
        assert rows[0].abs == float(n)
        assert all(row.abs <= n + row.err_radius for row in rows)

    def test_shape_at_zero_frequency(self):
        assert van_der_corput_shape(0, 64) == 64.0
        assert van_der_corput_shape(10, 64) > 0

    def test_negative_frequency_rejected(self):
        with pytest.raises(ValidationException):
            bound_probe(10, [-1])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
