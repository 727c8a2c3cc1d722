from __future__ import annotations

import csv
import io
import logging
from typing import Iterable, List, Optional, Sequence, TextIO

from pydantic import BaseModel

_logger = logging.getLogger(__name__)


def _cell(value: object) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class TableRepository:
    """CSV and JSON rendering of result tables onto a text stream."""

    def __init__(self, stream: TextIO):
        self.stream = stream

    def write_csv(self, rows: Sequence[BaseModel], columns: Optional[List[str]] = None) -> None:
        if not rows and columns is None:
            return
        columns = columns or list(type(rows[0]).model_fields)
        writer = csv.writer(self.stream, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            data = row.model_dump()
            writer.writerow([_cell(data[column]) for column in columns])
        _logger.debug("CSV table written", extra={"event": "csv_written", "rows": len(rows)})

    def write_json(self, model: BaseModel) -> None:
        self.stream.write(model.model_dump_json(indent=2))
        self.stream.write("\n")

    def write_json_lines(self, lines: Iterable[str]) -> None:
        for line in lines:
            self.stream.write(line + "\n")


def render_csv(rows: Sequence[BaseModel], columns: Optional[List[str]] = None) -> str:
    buffer = io.StringIO()
    TableRepository(buffer).write_csv(rows, columns)
    return buffer.getvalue()
