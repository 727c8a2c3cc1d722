"""
Test suite for the regression checks over published examples.
"""

from fractions import Fraction

import pytest

from app.exceptions import PrecisionLimitException
from app.services import known_examples
from app.services.known_examples import CheckStatus, check_family_k2, run_known_checks


class TestKnownExamples:
    """Test the known-example suite."""

    def test_every_check_passes(self):
        results = run_known_checks()
        failed = [r.to_dict() for r in results if not r.passed]
        assert failed == []
        assert len(results) == len(known_examples.KNOWN_CHECKS)

    def test_family_check_reports_ratio(self):
        result = check_family_k2(100, Fraction(1), Fraction(1, 100))
        assert result.status is CheckStatus.PASSED
        assert "x 4a^3" in result.observed

    def test_errors_are_reported_not_raised(self, monkeypatch):
        def exploding_check():
            raise PrecisionLimitException("too deep", details={"precision_bits": 1})

        monkeypatch.setattr(known_examples, "KNOWN_CHECKS", [exploding_check])
        (result,) = run_known_checks()
        assert result.status is CheckStatus.ERROR
        assert result.name == "exploding_check"
        assert "PrecisionLimitException" in result.detail
        assert not result.passed


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
