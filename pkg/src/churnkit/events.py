"""Raw event-log model and ingestion.

Events arrive as CSV or JSONL rows with the fixed schema
``user_id,timestamp_iso8601,event_kind,duration_s,country``.
Ingestion validates, deduplicates and sorts; malformed rows are collected
into a rejection report instead of aborting the run.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Optional

EVENT_KINDS = frozenset(
    {
        "login",
        "session_end",
        "click",
        "video_start",
        "video_stop",
        "test_passed",
        "action_card_view",
        "drug_list_view",
    }
)

# kinds that must carry a duration
DURATION_KINDS = frozenset({"session_end", "video_stop"})

# kinds counted as clicks in the daily action count
CLICK_KINDS = frozenset(
    {"click", "video_start", "video_stop", "test_passed", "action_card_view", "drug_list_view"}
)

# clicks on videos, action cards and testing features
ELEARNING_KINDS = frozenset({"video_start", "video_stop", "test_passed", "action_card_view"})

CSV_COLUMNS = ["user_id", "timestamp_iso8601", "event_kind", "duration_s", "country"]


class IngestError(Exception):
    """Unrecoverable ingestion failure (empty input, undecodable stream)."""


@dataclass(frozen=True, order=True)
class EventRecord:
    """One timestamped user action from the raw log."""

    user_id: str
    timestamp: datetime
    event_kind: str
    duration_s: Optional[int] = None
    country: str = ""

    def __post_init__(self):
        if self.event_kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind: {self.event_kind!r}")
        has_dur = self.duration_s is not None
        if has_dur != (self.event_kind in DURATION_KINDS):
            raise ValueError(
                f"duration_s must be present iff kind in {sorted(DURATION_KINDS)}; "
                f"got kind={self.event_kind} duration_s={self.duration_s}"
            )
        if has_dur and self.duration_s < 0:
            raise ValueError("duration_s must be non-negative")


@dataclass
class RejectedRow:
    line_no: int
    raw: str
    reason: str


@dataclass
class IngestResult:
    records: list  # list[EventRecord], sorted, deduplicated
    rejected: list  # list[RejectedRow]
    duplicates_dropped: int

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def _parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _record_from_fields(user_id, ts_text, kind, dur_text, country) -> EventRecord:
    if not user_id:
        raise ValueError("empty user_id")
    dur = None
    if dur_text not in (None, ""):
        dur = int(float(dur_text))
    return EventRecord(
        user_id=str(user_id),
        timestamp=_parse_timestamp(str(ts_text)),
        event_kind=str(kind),
        duration_s=dur,
        country=str(country or ""),
    )


def ingest_events(source: IO, format: str = "csv") -> IngestResult:
    """Parse an event stream, dropping exact duplicates and collecting bad rows.

    Returns records sorted by (user_id, timestamp); processing continues past
    malformed rows, which end up in ``result.rejected`` with their line number.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    if not raw.strip():
        raise IngestError("empty input")

    records = []
    rejected = []
    if format == "csv":
        reader = csv.reader(io.StringIO(raw))
        header = next(reader)
        if [h.strip() for h in header] != CSV_COLUMNS:
            raise IngestError(f"bad csv header: expected {CSV_COLUMNS}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c for c in row):
                continue
            try:
                if len(row) != len(CSV_COLUMNS):
                    raise ValueError(f"expected {len(CSV_COLUMNS)} columns, got {len(row)}")
                records.append(_record_from_fields(*row))
            except (ValueError, TypeError) as exc:
                rejected.append(RejectedRow(line_no, ",".join(row), str(exc)))
    elif format == "jsonl":
        for line_no, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(
                    _record_from_fields(
                        obj.get("user_id"),
                        obj.get("timestamp_iso8601"),
                        obj.get("event_kind"),
                        obj.get("duration_s"),
                        obj.get("country"),
                    )
                )
            except (ValueError, TypeError, AttributeError) as exc:
                rejected.append(RejectedRow(line_no, line, str(exc)))
    else:
        raise IngestError(f"unknown format: {format!r}")

    records.sort()
    deduped = []
    dropped = 0
    prev = None
    for rec in records:
        if rec == prev:
            dropped += 1
            continue
        deduped.append(rec)
        prev = rec
    return IngestResult(records=deduped, rejected=rejected, duplicates_dropped=dropped)


def format_event_csv_row(rec: EventRecord) -> str:
    dur = "" if rec.duration_s is None else str(rec.duration_s)
    ts = rec.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")
    return f"{rec.user_id},{ts},{rec.event_kind},{dur},{rec.country}"


def write_events_csv(records: Iterable[EventRecord], stream: IO) -> None:
    """Write records in the canonical CSV form (UTF-8, LF, fixed column order)."""
    stream.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        stream.write(format_event_csv_row(rec) + "\n")
