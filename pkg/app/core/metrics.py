"""
Prometheus metrics for certification, search and exponential-sum work.

A dedicated registry keeps the toolkit's series separate from the default
process collectors; `write_metrics` dumps it in text exposition format for a
node-exporter textfile collector.
"""

import logging
import time
from contextlib import contextmanager
from typing import Iterator

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

_logger = logging.getLogger(__name__)

registry = CollectorRegistry()

certifications_total = Counter(
    'certifications_total',
    'Total certified distance evaluations',
    ['outcome'],
    registry=registry,
)

precision_escalations_total = Counter(
    'precision_escalations_total',
    'Total precision doublings during adaptive evaluation',
    registry=registry,
)

certification_precision_bits = Histogram(
    'certification_precision_bits',
    'Working precision at which a certificate was issued',
    buckets=(64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384, 65536),
    registry=registry,
)

search_candidates_total = Counter(
    'search_candidates_total',
    'Candidates passed from the fractional-key filter to certification',
    ['method'],
    registry=registry,
)

search_records_total = Counter(
    'search_records_total',
    'Certified near-integer records emitted',
    ['method'],
    registry=registry,
)

expsum_terms_total = Counter(
    'expsum_terms_total',
    'Unit vectors accumulated into exponential sums',
    registry=registry,
)

command_duration = Histogram(
    'command_duration_seconds',
    'CLI subcommand duration in seconds',
    ['subcommand'],
    registry=registry,
)


@contextmanager
def track_duration(subcommand: str) -> Iterator[None]:
    """Observe the wall time of a subcommand, even when it raises."""
    start_time = time.perf_counter()
    try:
        yield
    finally:
        duration = time.perf_counter() - start_time
        command_duration.labels(subcommand=subcommand).observe(duration)
        _logger.info(
            "Subcommand finished",
            extra={"event": "command_finished", "duration_seconds": duration},
        )


def write_metrics(path: str) -> None:
    write_to_textfile(path, registry)
    _logger.debug("Metrics written to %s", path)
