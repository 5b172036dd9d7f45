"""Append-only per-job event journal.

One record per line: { seq, job_id, timestamp, actor, action, payload }.
Sequence numbers are strictly increasing per job and appends are guarded by
an optimistic expected-sequence check, which serializes writers per job.
Replaying a journal from an empty store reproduces the store state exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional
from urllib.parse import quote

from .exceptions import ConflictError, ValidationError


@dataclass(frozen=True)
class EventRecord:
    seq: int
    job_id: str
    timestamp: int  # wall clock, milliseconds
    actor: str
    action: str
    payload: dict

    def to_wire(self) -> dict:
        return {
            "seq": self.seq,
            "job_id": self.job_id,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "payload": self.payload,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_wire(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_wire(cls, obj: dict) -> "EventRecord":
        try:
            return cls(
                seq=int(obj["seq"]),
                job_id=str(obj["job_id"]),
                timestamp=int(obj["timestamp"]),
                actor=str(obj["actor"]),
                action=str(obj["action"]),
                payload=dict(obj["payload"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed journal record: {obj!r}") from exc

    @classmethod
    def from_json_line(cls, line: str) -> "EventRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"journal line is not valid JSON: {line[:120]!r}") from exc
        return cls.from_wire(obj)


class Journal:
    """The append-only event log of a single job, optionally file-backed."""

    def __init__(self, job_id: str, path: Optional[Path] = None):
        self.job_id = job_id
        self.path = Path(path) if path is not None else None
        self._records: list[EventRecord] = []

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self._records)

    @property
    def last_seq(self) -> int:
        return self._records[-1].seq if self._records else 0

    def append(self, record: EventRecord, expected_seq: Optional[int] = None) -> int:
        """Append a record; its seq must be exactly last_seq + 1.

        Callers may pass the sequence they last observed as expected_seq;
        a mismatch means another writer got there first.
        """
        if record.job_id != self.job_id:
            raise ValidationError(
                f"record for job {record.job_id!r} appended to journal of {self.job_id!r}"
            )
        if expected_seq is not None and expected_seq != self.last_seq:
            raise ConflictError(
                f"job {self.job_id}: expected sequence {expected_seq}, journal is at {self.last_seq}"
            )
        if record.seq != self.last_seq + 1:
            raise ConflictError(
                f"job {self.job_id}: record seq {record.seq} does not follow {self.last_seq}"
            )
        self._records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json_line() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return record.seq

    @classmethod
    def load(cls, path: Path, job_id: Optional[str] = None) -> "Journal":
        records = list(read_journal_file(path))
        if not records and job_id is None:
            raise ValidationError(f"cannot infer job id from empty journal {path}")
        jid = job_id if job_id is not None else records[0].job_id
        journal = cls(jid, path=None)
        for rec in records:
            journal.append(rec)
        journal.path = Path(path)
        return journal


def read_journal_file(path: Path) -> Iterable[EventRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield EventRecord.from_json_line(line)


def journal_filename(job_id: str) -> str:
    return f"job-{quote(job_id, safe='')}.jsonl"
