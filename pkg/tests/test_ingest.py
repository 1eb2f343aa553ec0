import io
from datetime import datetime, timezone

import pytest

from churnkit.events import (
    CSV_COLUMNS,
    EventRecord,
    IngestError,
    ingest_events,
    write_events_csv,
)

HEADER = ",".join(CSV_COLUMNS)


def ts(text):
    return datetime.fromisoformat(text).replace(tzinfo=timezone.utc)


def test_basic_csv_roundtrip():
    recs = [
        EventRecord("u1", ts("2021-01-01T08:00:00"), "login", None, "ke"),
        EventRecord("u1", ts("2021-01-01T08:10:00"), "click", None, "ke"),
        EventRecord("u1", ts("2021-01-01T08:30:00"), "session_end", 1800, "ke"),
    ]
    buf = io.StringIO()
    write_events_csv(recs, buf)
    result = ingest_events(io.BytesIO(buf.getvalue().encode()))
    assert result.records == recs
    assert result.n_rejected == 0
    assert result.duplicates_dropped == 0
    # canonical form is a fixed point
    buf2 = io.StringIO()
    write_events_csv(result.records, buf2)
    assert buf2.getvalue() == buf.getvalue()


def test_sorting_and_dedup():
    lines = [
        HEADER,
        "u2,2021-01-02T09:00:00Z,login,,",
        "u1,2021-01-01T09:00:00Z,login,,",
        "u1,2021-01-01T09:00:00Z,login,,",  # exact duplicate
    ]
    result = ingest_events("\n".join(lines).encode())
    assert [r.user_id for r in result.records] == ["u1", "u2"]
    assert result.duplicates_dropped == 1


def test_rejects_collected_with_line_numbers():
    lines = [
        HEADER,
        "u1,2021-01-01T09:00:00Z,login,,",
        "u1,not-a-timestamp,login,,",
        "u1,2021-01-01T10:00:00Z,bad_kind,,",
        "u1,2021-01-01T11:00:00Z,login,42,",  # login must not carry a duration
        ",2021-01-01T12:00:00Z,login,,",  # empty user id
        "u1,2021-01-01T13:00:00Z,session_end,,",  # session_end requires one
    ]
    result = ingest_events("\n".join(lines).encode())
    assert len(result.records) == 1
    assert [r.line_no for r in result.rejected] == [3, 4, 5, 6, 7]


def test_jsonl_format():
    lines = [
        '{"user_id": "u1", "timestamp_iso8601": "2021-01-01T09:00:00Z", "event_kind": "login"}',
        '{"user_id": "u1", "timestamp_iso8601": "2021-01-01T09:30:00Z", "event_kind": "session_end", "duration_s": 1800}',
        "not json",
    ]
    result = ingest_events("\n".join(lines).encode(), format="jsonl")
    assert len(result.records) == 2
    assert result.rejected[0].line_no == 3


def test_empty_input_and_bad_header_raise():
    with pytest.raises(IngestError):
        ingest_events(b"   \n")
    with pytest.raises(IngestError):
        ingest_events(b"wrong,header\nu1,x,login,,\n")
    with pytest.raises(IngestError):
        ingest_events(b"x", format="xml")


def test_timezone_normalized_to_utc():
    row = "u1,2021-01-01T12:00:00+02:00,login,,"
    result = ingest_events(f"{HEADER}\n{row}\n".encode())
    assert result.records[0].timestamp == ts("2021-01-01T10:00:00")


def test_duration_validation_on_record():
    with pytest.raises(ValueError):
        EventRecord("u1", ts("2021-01-01T00:00:00"), "video_stop", None)
    with pytest.raises(ValueError):
        EventRecord("u1", ts("2021-01-01T00:00:00"), "session_end", -5)
    with pytest.raises(ValueError):
        EventRecord("u1", ts("2021-01-01T00:00:00"), "nonsense")
