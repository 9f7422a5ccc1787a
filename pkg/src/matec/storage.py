"""Append-only record logs with checksums, plus the engine's persistent store.

Each log is a flat file of frames ``[len u32][crc32 u32][json payload]``
(little-endian). Writes always go to the end; the in-memory index is rebuilt
by a full forward scan at startup. Recovery rules:

- an incomplete trailing frame (torn write) is discarded with a warning and
  the file is truncated back to the last committed frame;
- a checksum mismatch on the trailing frame is treated the same way;
- a checksum mismatch anywhere earlier is real corruption and aborts startup.
"""
from __future__ import annotations

import json
import logging
import struct
import threading
import zlib
from pathlib import Path
from typing import Any, Optional

from .domain import (
    DomainError,
    PatientCase,
    Transcript,
    case_from_interchange,
    to_interchange,
    transcript_from_interchange,
)
from .news import MonitorAlert

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<II")  # payload length, crc32 of payload


class CorruptRecord(DomainError):
    """Checksum mismatch before the final frame; the log needs intervention."""


class RecordLog:
    """One append-only frame log; thread-safe appends, full-scan recovery."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)

    def append(self, record: dict[str, Any]) -> None:
        payload = json.dumps(record, sort_keys=True, separators=(",", ":")).encode()
        frame = _HEADER.pack(len(payload), zlib.crc32(payload)) + payload
        with self._lock:
            with open(self.path, "ab") as fh:
                fh.write(frame)
                fh.flush()

    def recover(self) -> list[dict[str, Any]]:
        """Scan every committed record, truncating a torn or bad-crc tail."""
        records: list[dict[str, Any]] = []
        with self._lock:
            data = self.path.read_bytes()
            offset = 0
            good_end = 0
            size = len(data)
            while offset < size:
                if offset + _HEADER.size > size:
                    self._truncate(good_end, "incomplete frame header")
                    return records
                length, crc = _HEADER.unpack_from(data, offset)
                start = offset + _HEADER.size
                end = start + length
                if end > size:
                    self._truncate(good_end, "incomplete frame payload")
                    return records
                payload = data[start:end]
                if zlib.crc32(payload) != crc:
                    if end >= size:
                        self._truncate(good_end, "checksum mismatch on trailing frame")
                        return records
                    raise CorruptRecord(
                        f"{self.path}: checksum mismatch at byte {offset} "
                        f"({len(records)} records read); refusing to start"
                    )
                records.append(json.loads(payload))
                offset = end
                good_end = end
        return records

    def _truncate(self, good_end: int, reason: str) -> None:
        logger.warning("%s: discarding torn tail (%s), keeping %d bytes", self.path, reason, good_end)
        with open(self.path, "r+b") as fh:
            fh.truncate(good_end)


# ---------------------------------------------------------------------------
# Engine store
# ---------------------------------------------------------------------------

class EngineStore:
    """Cases, transcripts, and monitor alerts over three record logs.

    Case updates append a full new snapshot (last write wins on recovery);
    transcripts and alerts are immutable appends. All indexes live in memory
    and are rebuilt by ``open``.
    """

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self._cases_log = RecordLog(self.directory / "cases.log")
        self._transcripts_log = RecordLog(self.directory / "transcripts.log")
        self._alerts_log = RecordLog(self.directory / "alerts.log")
        self._lock = threading.Lock()
        self.cases: dict[str, PatientCase] = {}
        self.transcripts: dict[str, Transcript] = {}
        self.case_transcripts: dict[str, list[str]] = {}
        self.alerts: dict[str, list[MonitorAlert]] = {}

    @classmethod
    def open(cls, directory: Path | str) -> "EngineStore":
        store = cls(directory)
        for record in store._cases_log.recover():
            case = case_from_interchange(record)
            store.cases[case.case_id] = case
        for record in store._transcripts_log.recover():
            transcript = transcript_from_interchange(record)
            store._index_transcript(transcript)
        for record in store._alerts_log.recover():
            record.pop("schema_version", None)
            alert = MonitorAlert.model_validate(record)
            store.alerts.setdefault(alert.case_id, []).append(alert)
        return store

    def _index_transcript(self, transcript: Transcript) -> None:
        self.transcripts[transcript.transcript_id] = transcript
        self.case_transcripts.setdefault(transcript.case_id, []).append(transcript.transcript_id)

    # -- writes (append + index under one lock) --------------------------------

    def put_case(self, case: PatientCase) -> None:
        with self._lock:
            self._cases_log.append(to_interchange(case))
            self.cases[case.case_id] = case

    def put_transcript(self, transcript: Transcript) -> None:
        with self._lock:
            self._transcripts_log.append(to_interchange(transcript))
            self._index_transcript(transcript)

    def put_alert(self, alert: MonitorAlert) -> None:
        with self._lock:
            self._alerts_log.append(to_interchange(alert))
            self.alerts.setdefault(alert.case_id, []).append(alert)

    # -- reads ------------------------------------------------------------------

    def get_case(self, case_id: str) -> Optional[PatientCase]:
        return self.cases.get(case_id)

    def get_transcript(self, transcript_id: str) -> Optional[Transcript]:
        return self.transcripts.get(transcript_id)

    def transcripts_for_case(self, case_id: str) -> list[Transcript]:
        return [self.transcripts[t] for t in self.case_transcripts.get(case_id, [])]

    def alerts_for_case(self, case_id: str) -> list[MonitorAlert]:
        return list(self.alerts.get(case_id, []))

    def cases_in_unit(self, unit_id: str) -> list[PatientCase]:
        return sorted(
            (c for c in self.cases.values() if c.unit_id == unit_id),
            key=lambda c: c.case_id,
        )
