"""
Command-line front end.

stdout carries only the command's result; logs go to stderr as JSON. Errors
are reported by `app.cli.error_handling` and mapped to exit codes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import ExitStack
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO
from uuid import uuid4

from app.cli.error_handling import EXIT_FAILURE, EXIT_OK, handle_exception
from app.core.config import get_settings
from app.core.logging import run_id_var, setup_logging, subcommand_var
from app.core.metrics import track_duration, write_metrics
from app.exceptions.custom_exceptions import (
    ConfigurationException,
    ParseException,
    PersistenceException,
    ValidationException,
)
from app.models.schemas import NearIntegerRecord, RunConfig, SearchConfig, parse_rational
from app.repositories.record_repository import RecordRepository, ShardProgressRepository
from app.repositories.table_repository import TableRepository
from app.services.expsum import bound_probe, identity_check
from app.services.gaps import (
    gap_report,
    largest_gap_trend,
    min_nonzero_distance,
    reference_shapes,
)
from app.services.known_examples import run_known_checks
from app.services.rootsum import certified_distance, parse_terms, sign
from app.services.search import (
    binomial_cancellation,
    binomial_record,
    family_k2,
    family_k3,
    run_search,
)

_logger = logging.getLogger(__name__)

Payload = Dict[str, Any]
Command = Callable[[argparse.Namespace, RunConfig, "Output"], int]

METHOD_CHOICES = ("exhaustive", "mitm", "family-k2", "family-k3", "binomial")


def _pm(pair) -> str:
    value, radius = pair
    return f"{value} ± {radius}"


def emit(
    out: TextIO,
    fmt: str,
    rows: List[Payload],
    title: Optional[str] = None,
    many: bool = False,
) -> None:
    """Render flat payloads as JSON, CSV or ``key: value`` text."""
    if fmt == "json":
        out.write(json.dumps(rows if many else rows[0], indent=2) + "\n")
    elif fmt == "csv":
        if rows:
            writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    else:
        if title:
            out.write(title + "\n")
        for index, row in enumerate(rows):
            if index:
                out.write("\n")
            width = max(len(key) for key in row) if row else 0
            for key, value in row.items():
                out.write(f"{key.ljust(width)}  {value}\n")


def emit_records(out: TextIO, fmt: str, records: Sequence[NearIntegerRecord]) -> None:
    if fmt == "json":
        TableRepository(out).write_json_lines(record.to_json_line() for record in records)
        return
    if fmt == "csv":
        rows = [json.loads(record.to_json_line()) for record in records]
        for row in rows:
            row["radicands"] = " ".join(row["radicands"])
            row["signs"] = " ".join(row["signs"])
        emit(out, "csv", rows)
        return
    for record in records:
        terms = " ".join(
            f"{'+' if s > 0 else '-'}{a}" for a, s in zip(record.radicands, record.signs)
        )
        out.write(
            f"{terms}  nearest={record.nearest_integer}  "
            f"distance={record.distance} ± {record.radius}  bits={record.precision_bits}\n"
        )
    out.write(f"{len(records)} records\n")


def cmd_eval(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    expr = parse_terms(args.terms)
    cert = certified_distance(expr, precision_bits=config.precision_bits)
    out = output.stream
    payload = {
        "expression": str(expr),
        "nearest_integer": str(cert.nearest_integer),
        "distance": _pm(cert.distance_decimal(20)),
        "value": _pm(cert.value_decimal(30)),
        "precision_bits": str(cert.precision_bits),
        "exactly_integer": str(cert.exactly_integer).lower(),
    }
    title = f"EXACT INTEGER {cert.nearest_integer}" if cert.exactly_integer else None
    emit(out, config.format, [payload], title)
    return EXIT_OK


def cmd_decide(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    expr = parse_terms(args.terms)
    decision = sign(expr, precision_bits=config.precision_bits)
    out = output.stream
    payload = {
        "expression": str(expr),
        "sign": {1: "+1", -1: "-1", 0: "0"}[decision.sign],
        "is_integer": str(decision.is_integer).lower(),
        "integer_value": "" if decision.integer_value is None else str(decision.integer_value),
        "value": _pm(decision.enclosure.to_decimal_pair(30)),
        "precision_bits": str(decision.precision_bits),
    }
    verdict = {1: "POSITIVE", -1: "NEGATIVE", 0: "ZERO"}[decision.sign]
    if decision.is_integer:
        verdict += f" (EXACT INTEGER {decision.integer_value})"
    emit(out, config.format, [payload], verdict)
    return EXIT_OK


def _require(value: Optional[int], flag: str, context: str) -> int:
    if value is None:
        raise ValidationException(
            f"--{flag} is required for {context}", details={"flag": flag, "context": context}
        )
    return value


def _write_records(output: Output, fmt: str, records: Sequence[NearIntegerRecord]) -> None:
    if fmt == "json" and output.path is not None:
        RecordRepository(output.path).write_all(records)
    else:
        emit_records(output.stream, fmt, records)


def cmd_search(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    method = args.method
    context = f"--method {method}"
    if method == "family-k2":
        record = family_k2(_require(args.param, "param", context), config.precision_bits)
        _write_records(output, config.format, [record])
        return EXIT_OK
    if method == "family-k3":
        record = family_k3(_require(args.param, "param", context), config.precision_bits)
        _write_records(output, config.format, [record])
        return EXIT_OK
    if method == "binomial":
        m = _require(args.param, "param", context)
        n = _require(args.n, "n", context)
        check = binomial_cancellation(m, n, config.precision_bits)
        record = binomial_record(check)
        payload = {
            "m": str(m),
            "n": str(n),
            "lhs": _pm(check.lhs.to_decimal_pair(20)),
            "rhs": _pm(check.rhs.to_decimal_pair(20)),
            "holds": str(check.holds).lower(),
            "distance": f"{record.distance} ± {record.radius}",
            "precision_bits": str(check.precision_bits),
        }
        emit(output.stream, config.format, [payload])
        return EXIT_OK

    cfg = SearchConfig(
        k=_require(args.k, "k", context),
        n_max=_require(args.n, "n", context),
        threshold=args.threshold,
        target_offset=args.offset_y,
        shard_count=args.shards or config.parallelism,
        record_limit=args.record_limit,
        precision_bits=config.precision_bits,
    )
    progress = None
    if args.resume:
        if config.output_path is None:
            raise ValidationException("--resume needs --output for the progress file")
        progress = ShardProgressRepository(Path(config.output_path + ".progress"))
    records = run_search(method, cfg, config.parallelism, progress)
    _write_records(output, config.format, records)
    return EXIT_OK


def _parse_grid(text: str) -> List[int]:
    grid = []
    for position, piece in enumerate(text.split(","), start=1):
        try:
            grid.append(int(piece))
        except ValueError:
            raise ParseException(
                f"Cannot parse frequency {piece!r} at position {position}",
                details={"position": position, "token": piece},
            ) from None
    return grid


def cmd_expsum(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    grid = _parse_grid(args.ell_grid)
    rows = bound_probe(args.n, grid, config.parallelism, args.precision_bits)
    out = output.stream
    if config.format == "csv":
        TableRepository(out).write_csv(rows)
    else:
        emit(out, config.format, [row.model_dump() for row in rows], many=True)
    return EXIT_OK


def cmd_count(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    check = identity_check(args.k, args.n, args.s, args.L, parse_rational(args.y))
    out = output.stream
    if config.format == "csv":
        TableRepository(out).write_csv([check])
    else:
        emit(out, config.format, [check.model_dump()])
    return EXIT_OK if check.holds else EXIT_FAILURE


def _gap_trend(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    trend = largest_gap_trend(args.k, _parse_grid(args.n_grid))
    out = output.stream
    repository = TableRepository(out)
    if config.format == "json":
        repository.write_json(trend)
    elif config.format == "csv":
        repository.write_csv(trend.points)
    else:
        for point in trend.points:
            out.write(f"n={point.n}  largest_gap={point.largest_gap!r}  scaled={point.scaled_gap!r}\n")
        verdict = "non-increasing" if trend.non_increasing else f"grew at n={trend.violations}"
        out.write(f"largest gap {verdict}\n")
    return EXIT_OK if trend.non_increasing else EXIT_FAILURE


def cmd_gaps(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    if args.n_grid is not None:
        return _gap_trend(args, config, output)
    report = gap_report(args.k, _require(args.n, "n", "gaps"))
    out = output.stream
    repository = TableRepository(out)
    if config.format == "json":
        repository.write_json(report)
    elif config.format == "csv":
        repository.write_csv(report.histogram)
    else:
        summary = report.model_dump(exclude={"histogram", "reference_shapes"})
        emit(out, "text", [summary])
        out.write("\n")
        for bucket in report.histogram:
            if bucket.count:
                out.write(f"[{bucket.lower}, {bucket.upper})  {bucket.count}\n")
    return EXIT_OK


def cmd_min_distance(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    expr, cert = min_nonzero_distance(args.k, args.n)
    payload = {
        "radicands": " ".join(str(a) for a in expr.radicands),
        "nearest_integer": str(cert.nearest_integer),
        "distance": _pm(cert.distance_decimal(20)),
        "precision_bits": str(cert.precision_bits),
    }
    shapes = reference_shapes(args.k, args.n)
    payload.update({f"shape_{name}": repr(value) for name, value in shapes.items()})
    emit(output.stream, config.format, [payload])
    return EXIT_OK


def cmd_verify_known(args: argparse.Namespace, config: RunConfig, output: Output) -> int:
    results = run_known_checks()
    out = output.stream
    rows = [{key: str(value) for key, value in result.to_dict().items()} for result in results]
    if config.format == "text":
        for result in results:
            out.write(f"{result.status.value.upper():7}  {result.name}: {result.observed}"
                      f"  (expected {result.expected}){'  ' + result.detail if result.detail else ''}\n")
        passed = sum(result.passed for result in results)
        out.write(f"{passed}/{len(results)} checks passed\n")
    else:
        emit(out, config.format, rows, many=True)
    return EXIT_OK if all(result.passed for result in results) else EXIT_FAILURE


COMMANDS: Dict[str, Command] = {
    "eval": cmd_eval,
    "decide": cmd_decide,
    "search": cmd_search,
    "expsum": cmd_expsum,
    "count": cmd_count,
    "gaps": cmd_gaps,
    "min-distance": cmd_min_distance,
    "verify-known": cmd_verify_known,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Certified arithmetic for sums of square roots.",
    )
    parser.add_argument("--precision", type=int, default=None,
                        help="initial working precision in bits (default: DEFAULT_PRECISION_BITS)")
    parser.add_argument("--parallelism", type=int, default=None,
                        help="worker processes (default: PARALLELISM or the core count)")
    parser.add_argument("--output", default=None, help="write results to this file instead of stdout")
    parser.add_argument("--format", choices=("json", "csv", "text"), default="text")
    parser.add_argument("--log-level", default=None, help="log level (default: LOG_LEVEL)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("eval", help="certified distance to the nearest integer")
    p.add_argument("terms", nargs="+", help='signed radicands, e.g. "+3 +20 +23"')

    p = sub.add_parser("decide", help="certified sign and integrality")
    p.add_argument("terms", nargs="+", help='signed radicands, e.g. "+10 +11 -5 -18"')

    p = sub.add_parser("search", help="search for near-integer root sums")
    p.add_argument("--method", choices=METHOD_CHOICES, default="exhaustive")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--threshold", default="1e-4")
    p.add_argument("--offset-y", default="0")
    p.add_argument("--shards", type=int, default=None)
    p.add_argument("--record-limit", type=int, default=None)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--param", type=int, default=None,
                   help="a for family-k2, t for family-k3, m for binomial")

    p = sub.add_parser("expsum", help="exponential sums against bound shapes")
    p.add_argument("--ell-grid", required=True, help="comma-separated frequencies")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--precision-bits", type=int, default=None)

    p = sub.add_parser("count", help="counting identity, direct against Fourier side")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--y", default="0")

    p = sub.add_parser("gaps", help="gap structure of the fractional parts")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--n-grid", default=None,
                   help="comma-separated n values; reports the largest-gap trend instead")

    p = sub.add_parser("min-distance", help="certified minimum nonzero distance")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)

    sub.add_parser("verify-known", help="re-derive published examples")
    return parser


class Output:
    """Destination of a command's result; a file is opened on first use only."""

    def __init__(self, stack: ExitStack, path: Optional[str] = None):
        self._stack = stack
        self._stream: Optional[TextIO] = None
        self.path = path

    @property
    def stream(self) -> TextIO:
        if self._stream is None:
            if self.path is None:
                self._stream = sys.stdout
            else:
                try:
                    self._stream = self._stack.enter_context(open(self.path, "w", encoding="utf-8"))
                except OSError as e:
                    raise PersistenceException(
                        "Cannot open the output file",
                        details={"path": self.path, "reason": str(e)},
                    ) from e
        return self._stream


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run_id_var.set(uuid4().hex[:12])
    subcommand_var.set(args.subcommand)
    try:
        settings = get_settings()
    except ConfigurationException as exc:
        setup_logging(args.log_level or "info")
        return handle_exception(exc)
    setup_logging(args.log_level or settings.LOG_LEVEL)

    try:
        config = RunConfig(
            subcommand=args.subcommand,
            precision_bits=args.precision or settings.DEFAULT_PRECISION_BITS,
            parallelism=settings.resolve_parallelism(args.parallelism),
            output_path=args.output,
            format=args.format,
        )
        _logger.info(
            "Running subcommand",
            extra={"event": "command_started", "parallelism": config.parallelism,
                   "precision_bits": config.precision_bits},
        )
        with ExitStack() as stack, track_duration(args.subcommand):
            code = COMMANDS[args.subcommand](args, config, Output(stack, config.output_path))
    except Exception as exc:
        code = handle_exception(exc)
    finally:
        if settings.METRICS_TEXTFILE:
            write_metrics(settings.METRICS_TEXTFILE)
    return code
