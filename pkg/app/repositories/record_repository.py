from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Dict, Iterable, List, Union

from pydantic import ValidationError

from app.exceptions.custom_exceptions import PersistenceException
from app.models.domain import ShardResult
from app.models.schemas import NearIntegerRecord

_logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class RecordRepository:
    """NearIntegerRecord objects as JSON lines, every number a string."""

    def __init__(self, path: PathLike):
        self.path = Path(path)

    def write_all(self, records: Iterable[NearIntegerRecord]) -> None:
        lines = [record.to_json_line() for record in records]
        _atomic_write(self.path, "".join(line + "\n" for line in lines))
        _logger.info(
            "Records written",
            extra={"event": "records_written", "path": str(self.path), "count": len(lines)},
        )

    def read_all(self) -> List[NearIntegerRecord]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open(encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(NearIntegerRecord.from_json_line(line))
                except (ValueError, ValidationError) as e:
                    raise PersistenceException(
                        f"Unreadable record at line {line_number}",
                        details={"path": str(self.path), "line": line_number, "reason": str(e)},
                    ) from e
        return records


class ShardProgressRepository:
    """
    Completed shards of one search, keyed by the run fingerprint.

    The file holds ``{"fingerprint": ..., "shards": {id: {"candidates": c,
    "records": [json line, ...]}}}`` and is rewritten atomically after each shard.
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)

    def _read(self) -> Dict:
        try:
            return json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise PersistenceException(
                "Unreadable shard progress file",
                details={"path": str(self.path), "reason": str(e)},
            ) from e

    def load(self, fingerprint: str) -> Dict[int, ShardResult]:
        if not self.path.exists():
            return {}
        data = self._read()
        if data.get("fingerprint") != fingerprint:
            raise PersistenceException(
                "Shard progress belongs to a different search configuration",
                details={"path": str(self.path), "expected": fingerprint,
                         "found": data.get("fingerprint")},
            )
        completed = {}
        try:
            for shard_id, entry in data.get("shards", {}).items():
                completed[int(shard_id)] = ShardResult(
                    shard_id=int(shard_id),
                    candidates=int(entry["candidates"]),
                    records=[NearIntegerRecord.from_json_line(line) for line in entry["records"]],
                )
        except (KeyError, ValueError, ValidationError) as e:
            raise PersistenceException(
                "Corrupt shard progress entry",
                details={"path": str(self.path), "reason": str(e)},
            ) from e
        _logger.info(
            "Resuming search",
            extra={"event": "resume", "completed_shards": sorted(completed)},
        )
        return completed

    def save_shard(self, fingerprint: str, result: ShardResult) -> None:
        data = self._read() if self.path.exists() else {"fingerprint": fingerprint, "shards": {}}
        if data.get("fingerprint") != fingerprint:
            data = {"fingerprint": fingerprint, "shards": {}}
        data["shards"][str(result.shard_id)] = {
            "candidates": result.candidates,
            "records": [record.to_json_line() for record in result.records],
        }
        _atomic_write(self.path, json.dumps(data, sort_keys=True))
