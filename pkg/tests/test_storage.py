"""Append-only record logs: checksums, torn-tail recovery, index rebuild."""
import logging
import signal
import struct
import subprocess
import sys
import threading
import zlib
from pathlib import Path

import pytest

from conftest import FIXED_NOW, golden_case

from matec.domain import ConsultationMode, Transcript
from matec.news import MonitorAlert, RiskBand, compute_news
from matec.storage import CorruptRecord, EngineStore, RecordLog

_HEADER = struct.Struct("<II")


def frame(payload: bytes) -> bytes:
    return _HEADER.pack(len(payload), zlib.crc32(payload)) + payload


def make_transcript(n: int, case_id: str = "case-77") -> Transcript:
    return Transcript(
        transcript_id=f"t-{n:04d}",
        case_id=case_id,
        question="q",
        mode=ConsultationMode.TEAM_ASSESSMENT,
        created_at=FIXED_NOW,
    )


def make_alert(case_id: str = "case-77", at: str = "2026-03-01T11:00:00Z") -> MonitorAlert:
    news = compute_news(golden_case().latest_vitals())
    return MonitorAlert(
        case_id=case_id, at=at, previous_band=RiskBand.MEDIUM, new_band=RiskBand.HIGH,
        news=news, recommendation="escalate",
    )


class TestRecordLog:
    def test_hundred_record_round_trip(self, tmp_path: Path):
        log = RecordLog(tmp_path / "a.log")
        records = [{"i": i, "payload": "x" * (i % 17)} for i in range(100)]
        for record in records:
            log.append(record)
        assert RecordLog(tmp_path / "a.log").recover() == records

    def test_empty_log_recovers_empty(self, tmp_path: Path):
        assert RecordLog(tmp_path / "a.log").recover() == []

    def test_creates_parent_directories(self, tmp_path: Path):
        log = RecordLog(tmp_path / "deep" / "nested" / "a.log")
        log.append({"ok": True})
        assert log.recover() == [{"ok": True}]

    def test_torn_payload_truncated_with_warning(self, tmp_path: Path, caplog):
        path = tmp_path / "a.log"
        log = RecordLog(path)
        for i in range(100):
            log.append({"i": i})
        committed = path.stat().st_size
        with open(path, "ab") as fh:
            whole = frame(b'{"i": 100}')
            fh.write(whole[: len(whole) - 3])
        with caplog.at_level(logging.WARNING):
            records = RecordLog(path).recover()
        assert [r["i"] for r in records] == list(range(100))
        assert "torn tail" in caplog.text
        assert path.stat().st_size == committed  # physically truncated

    def test_torn_header_truncated(self, tmp_path: Path, caplog):
        path = tmp_path / "a.log"
        log = RecordLog(path)
        log.append({"i": 0})
        with open(path, "ab") as fh:
            fh.write(b"\x05\x00")  # two bytes of an eight-byte header
        with caplog.at_level(logging.WARNING):
            assert RecordLog(path).recover() == [{"i": 0}]
        assert "incomplete frame header" in caplog.text

    def test_bad_crc_on_tail_dropped(self, tmp_path: Path, caplog):
        path = tmp_path / "a.log"
        log = RecordLog(path)
        for i in range(3):
            log.append({"i": i})
        payload = b'{"i": 3}'
        with open(path, "ab") as fh:
            fh.write(_HEADER.pack(len(payload), zlib.crc32(payload) ^ 0xFF) + payload)
        with caplog.at_level(logging.WARNING):
            records = RecordLog(path).recover()
        assert [r["i"] for r in records] == [0, 1, 2]
        assert "checksum mismatch on trailing frame" in caplog.text

    def test_append_after_truncation_is_clean(self, tmp_path: Path):
        path = tmp_path / "a.log"
        log = RecordLog(path)
        log.append({"i": 0})
        with open(path, "ab") as fh:
            fh.write(b"torn")
        log2 = RecordLog(path)
        log2.recover()
        log2.append({"i": 1})
        assert [r["i"] for r in RecordLog(path).recover()] == [0, 1]

    def test_mid_log_corruption_refuses_to_start(self, tmp_path: Path):
        path = tmp_path / "a.log"
        log = RecordLog(path)
        for i in range(5):
            log.append({"i": i})
        data = bytearray(path.read_bytes())
        # flip one payload byte inside the second frame
        first_len = _HEADER.unpack_from(data, 0)[0]
        second_payload_at = _HEADER.size + first_len + _HEADER.size + 2
        data[second_payload_at] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptRecord, match="checksum mismatch"):
            RecordLog(path).recover()

    def test_concurrent_appends_all_recovered(self, tmp_path: Path):
        path = tmp_path / "a.log"
        log = RecordLog(path)

        def writer(worker: int):
            for i in range(50):
                log.append({"worker": worker, "i": i})

        threads = [threading.Thread(target=writer, args=(w,)) for w in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        records = RecordLog(path).recover()
        assert len(records) == 400
        seen = {(r["worker"], r["i"]) for r in records}
        assert seen == {(w, i) for w in range(8) for i in range(50)}


class TestEngineStore:
    def test_indexes_rebuilt_on_open(self, tmp_path: Path):
        store = EngineStore.open(tmp_path)
        case = golden_case()
        store.put_case(case)
        t1 = make_transcript(1)
        t2 = make_transcript(2)
        store.put_transcript(t1)
        store.put_transcript(t2)
        alert = make_alert()
        store.put_alert(alert)

        reopened = EngineStore.open(tmp_path)
        assert reopened.get_case("case-77") == case
        assert reopened.get_transcript("t-0001") == t1
        assert [t.transcript_id for t in reopened.transcripts_for_case("case-77")] == [
            "t-0001", "t-0002"]
        assert reopened.alerts_for_case("case-77") == [alert]
        assert reopened.get_case("missing") is None
        assert reopened.get_transcript("missing") is None

    def test_case_updates_last_write_wins(self, tmp_path: Path):
        store = EngineStore.open(tmp_path)
        store.put_case(golden_case())
        store.put_case(golden_case(chief_complaint="updated complaint"))
        reopened = EngineStore.open(tmp_path)
        assert reopened.get_case("case-77").chief_complaint == "updated complaint"
        assert len(reopened.cases) == 1

    def test_cases_in_unit_sorted_by_case_id(self, tmp_path: Path):
        store = EngineStore.open(tmp_path)
        store.put_case(golden_case(case_id="case-b", unit_id="unit-9"))
        store.put_case(golden_case(case_id="case-a", unit_id="unit-9"))
        store.put_case(golden_case(case_id="case-c", unit_id="other"))
        assert [c.case_id for c in store.cases_in_unit("unit-9")] == ["case-a", "case-b"]

    def test_transcript_order_preserved_per_case(self, tmp_path: Path):
        store = EngineStore.open(tmp_path)
        for n in (3, 1, 2):
            store.put_transcript(make_transcript(n))
        reopened = EngineStore.open(tmp_path)
        assert [t.transcript_id for t in reopened.transcripts_for_case("case-77")] == [
            "t-0003", "t-0001", "t-0002"]


_CRASH_CHILD = r"""
import os, signal, sys
sys.path.insert(0, {src!r})
from datetime import datetime, timezone
from matec.domain import ConsultationMode, Transcript
from matec.storage import EngineStore

store = EngineStore.open({directory!r})
now = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)
for n in range(100):
    store.put_transcript(Transcript(
        transcript_id=f"t-{{n:04d}}", case_id="case-77", question="q",
        mode=ConsultationMode.TEAM_ASSESSMENT, created_at=now))
# simulate dying mid-write: half a frame lands, then the process is killed
with open(store.directory / "transcripts.log", "ab") as fh:
    fh.write(b"\x80\x00\x00\x00\x99\x99")
    fh.flush()
    os.kill(os.getpid(), signal.SIGKILL)
"""


class TestCrashRecovery:
    def test_sigkill_during_write_loses_only_the_torn_tail(self, tmp_path: Path):
        src = str(Path(__file__).resolve().parent.parent / "src")
        child = _CRASH_CHILD.format(src=src, directory=str(tmp_path))
        proc = subprocess.run([sys.executable, "-c", child], capture_output=True)
        assert proc.returncode == -signal.SIGKILL, proc.stderr.decode()

        store = EngineStore.open(tmp_path)
        transcripts = store.transcripts_for_case("case-77")
        assert len(transcripts) == 100
        assert [t.transcript_id for t in transcripts] == [f"t-{n:04d}" for n in range(100)]
        # reopened log accepts new appends at the truncated position
        store.put_transcript(make_transcript(100))
        assert len(EngineStore.open(tmp_path).transcripts_for_case("case-77")) == 101
