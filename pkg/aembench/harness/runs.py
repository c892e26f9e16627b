"""Append-only run records (``runs.jsonl``).

A record is keyed by the hash of the solver configuration and the hash of
its inputs (dataset bytes, task). A completed record with matching keys
and an existing checkpoint makes the run a cache hit.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, List, Optional, Union

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


def content_hash(obj: Any) -> str:
    """Deterministic short hash for filenames and cache keys."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:12]


def file_hash(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()[:12]


class RunRecord(BaseModel):
    command: str
    task: str
    solver: str
    seed: int
    config_hash: str
    input_hash: str
    status: str = "ok"  # "ok" or "failed"
    cell: Optional[int] = None
    train_loss: List[float] = Field(default_factory=list)
    val_loss: List[float] = Field(default_factory=list)
    val_r1: Optional[float] = None
    train_seconds: float = 0.0
    eval_seconds: float = 0.0
    checkpoint: Optional[str] = None
    diagnostic: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class RunLog:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def append(self, record: RunRecord) -> RunRecord:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            fh.write(record.model_dump_json() + "\n")
        return record

    def records(self) -> List[RunRecord]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text().splitlines():
            if line.strip():
                out.append(RunRecord.model_validate_json(line))
        return out

    def completed(self, config_hash: str, input_hash: str) -> Optional[RunRecord]:
        """Most recent successful record for these hashes whose checkpoint still exists."""
        for rec in reversed(self.records()):
            if (
                rec.ok
                and rec.config_hash == config_hash
                and rec.input_hash == input_hash
                and rec.checkpoint
                and Path(rec.checkpoint).exists()
            ):
                logger.info("cached: %s %s (config %s, inputs %s)", rec.task, rec.solver, config_hash, input_hash)
                return rec
        return None
