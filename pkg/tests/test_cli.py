"""
Test suite for the command-line surface and exit codes.
"""

import io
import json

import pytest

from app.cli.error_handling import exit_code_for, handle_exception
from app.cli.main import main
from app.core.config import get_settings
from app.exceptions import (
    BaseAppException,
    ConfigurationException,
    ContractViolationException,
    FactorizationException,
    PersistenceException,
    PrecisionLimitException,
    PreconditionException,
)
from app.repositories.record_repository import RecordRepository


def _error_payload(stderr: str) -> dict:
    payloads = [json.loads(line) for line in stderr.splitlines() if line.startswith("{")]
    errors = [p for p in payloads if "error" in p and "run_id" in p]
    assert len(errors) == 1
    return errors[0]


class TestEvalAndDecide:
    """Test eval and decide."""

    def test_eval_json(self, capsys):
        assert main(["--format", "json", "eval", "+3", "+20", "+23"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["nearest_integer"] == "11"
        assert payload["distance"].startswith("0.0000182858")
        assert payload["exactly_integer"] == "false"

    def test_eval_exact_integer(self, capsys):
        assert main(["eval", "4", "9"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "EXACT INTEGER 5"

    def test_decide_with_negative_terms(self, capsys):
        assert main(["decide", "+10", "+11", "-5", "-18"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "POSITIVE"

    def test_decide_quoted_expression(self, capsys):
        assert main(["decide", "+2 +8 -18"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "ZERO (EXACT INTEGER 0)"

    def test_parse_error_exit_code(self, capsys):
        assert main(["eval", "3", "x"]) == 2
        payload = _error_payload(capsys.readouterr().err)
        assert payload["error"] == "ParseException"
        assert payload["details"] == {"position": 2, "token": "x"}

    def test_precision_below_minimum(self, capsys):
        assert main(["--precision", "8", "eval", "2"]) == 2
        assert _error_payload(capsys.readouterr().err)["error"] == "VALIDATION_ERROR"

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["nope"])


class TestSearchCommand:
    """Test the search subcommand."""

    ARGS = ["search", "--method", "exhaustive", "--k", "3", "--n", "30", "--threshold", "1e-3"]

    def test_json_lines_on_stdout(self, capsys):
        assert main(["--format", "json"] + self.ARGS) == 0
        lines = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert ["3", "20", "23"] in [line["radicands"] for line in lines]
        assert all(isinstance(line["distance"], str) for line in lines)

    def test_output_independent_of_parallelism(self, capsys):
        main(["--parallelism", "1"] + self.ARGS)
        first = capsys.readouterr().out
        main(["--parallelism", "2"] + self.ARGS + ["--shards", "3"])
        assert capsys.readouterr().out == first

    def test_records_file(self, tmp_path):
        path = tmp_path / "records.jsonl"
        assert main(["--format", "json", "--output", str(path)] + self.ARGS) == 0
        records = RecordRepository(path).read_all()
        assert [3, 20, 23] in [r.radicands for r in records]

    def test_resume(self, tmp_path, capsys):
        path = tmp_path / "records.txt"
        args = ["--output", str(path)] + self.ARGS + ["--shards", "3", "--resume"]
        assert main(args) == 0
        first = path.read_text()
        assert (tmp_path / "records.txt.progress").exists()
        assert main(args) == 0
        assert path.read_text() == first

    def test_resume_needs_output(self, capsys):
        assert main(self.ARGS + ["--resume"]) == 2

    def test_mitm_needs_k(self, capsys):
        assert main(["search", "--method", "mitm", "--n", "10"]) == 2

    def test_resource_limit_exit_code(self, monkeypatch, capsys):
        monkeypatch.setenv("SEARCH_MAX_TUPLES", "10")
        get_settings.cache_clear()
        assert main(self.ARGS) == 3
        assert _error_payload(capsys.readouterr().err)["error"] == "RESOURCE_LIMIT"

    def test_family_k2(self, capsys):
        assert main(["search", "--method", "family-k2", "--param", "100"]) == 0
        assert "nearest=200" in capsys.readouterr().out

    def test_binomial(self, capsys):
        assert main(["--format", "json", "search", "--method", "binomial", "--param", "3", "--n", "100"]) == 0
        assert json.loads(capsys.readouterr().out)["holds"] == "true"


class TestAnalysisCommands:
    """Test expsum, count, gaps, min-distance and verify-known."""

    def test_expsum_csv(self, capsys):
        assert main(["--format", "csv", "expsum", "--ell-grid", "1,2,3", "--n", "50"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("ell,n,re,im,abs,err_radius")
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2", "3"]

    def test_expsum_bad_grid(self, capsys):
        assert main(["expsum", "--ell-grid", "1,x", "--n", "50"]) == 2

    def test_count(self, capsys):
        assert main(["--format", "json", "count", "--k", "2", "--n", "20", "--s", "4", "--L", "400"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["holds"] is True
        assert payload["trivial_count"] == 16

    def test_gaps_json_and_csv(self, capsys):
        assert main(["--format", "json", "gaps", "--k", "1", "--n", "4"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["point_count"] == 3
        assert main(["--format", "csv", "gaps", "--k", "1", "--n", "4"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "lower,upper,count"

    def test_gap_trend(self, capsys):
        assert main(["--format", "json", "gaps", "--k", "2", "--n-grid", "40,20,80"]) == 0
        trend = json.loads(capsys.readouterr().out)
        assert [point["n"] for point in trend["points"]] == [20, 40, 80]
        assert trend["non_increasing"] is True

    def test_gaps_needs_n_or_grid(self, capsys):
        assert main(["gaps", "--k", "2"]) == 2

    def test_min_distance(self, capsys):
        assert main(["--format", "json", "min-distance", "--k", "1", "--n", "5"]) == 0
        assert json.loads(capsys.readouterr().out)["radicands"] == "5"

    def test_verify_known(self, capsys):
        assert main(["verify-known"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[-1] == f"{len(lines) - 1}/{len(lines) - 1} checks passed"


class TestRunEnvironment:
    """Test configuration failures and metrics output."""

    def test_invalid_configuration(self, monkeypatch, capsys):
        monkeypatch.setenv("DEFAULT_PRECISION_BITS", "8")
        get_settings.cache_clear()
        assert main(["eval", "2"]) == 78
        assert _error_payload(capsys.readouterr().err)["error"] == "ConfigurationException"

    def test_metrics_textfile(self, monkeypatch, tmp_path, capsys):
        path = tmp_path / "toolkit.prom"
        monkeypatch.setenv("METRICS_TEXTFILE", str(path))
        get_settings.cache_clear()
        assert main(["eval", "2"]) == 0
        assert "command_duration_seconds" in path.read_text()


class TestExitCodes:
    """Test the exception to exit-code mapping."""

    @pytest.mark.parametrize(
        "exc,code",
        [
            (PreconditionException("x"), 2),
            (PrecisionLimitException("x"), 3),
            (ContractViolationException("x"), 4),
            (FactorizationException("x"), 5),
            (PersistenceException("x"), 6),
            (ConfigurationException("x"), 78),
            (BaseAppException("x"), 1),
            (RuntimeError("x"), 70),
        ],
    )
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code

    def test_production_hides_traceback(self, configure):
        configure(ENVIRONMENT="production")
        stream = io.StringIO()
        assert handle_exception(RuntimeError("boom"), stream) == 70
        payload = json.loads(stream.getvalue())
        assert payload["error"] == "INTERNAL_ERROR"
        assert payload["details"] == {}


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
