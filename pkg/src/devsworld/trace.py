"""JSONL event traces: one ``{"time", "entity", "event", "payload"}`` object per line."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

KEYS = ("time", "entity", "event", "payload")


class SerializationError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    time: float
    entity: str
    event: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LineError:
    line: int
    kind: str
    message: str


@dataclass
class TraceValidationReport:
    valid: bool
    line_errors: list[LineError]
    record_count: int


def _check_value(value, where: str) -> None:
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise SerializationError(f"non-finite float at {where}")
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            _check_value(item, f"{where}[{i}]")
        return
    if isinstance(value, dict):
        for k, item in value.items():
            if not isinstance(k, str):
                raise SerializationError(f"non-string key {k!r} at {where}")
            _check_value(item, f"{where}.{k}")
        return
    raise SerializationError(f"unsupported value type {type(value).__name__} at {where}")


def serialize_record(record: TraceRecord) -> str:
    t = record.time
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
        raise SerializationError(f"invalid time {t!r}")
    if not isinstance(record.entity, str) or not record.entity:
        raise SerializationError("entity must be a non-empty string")
    if not isinstance(record.event, str) or not record.event:
        raise SerializationError("event must be a non-empty string")
    if not isinstance(record.payload, dict):
        raise SerializationError("payload must be a dict")
    _check_value(record.payload, "payload")
    obj = {"time": float(t), "entity": record.entity, "event": record.event, "payload": record.payload}
    return json.dumps(obj, ensure_ascii=False, allow_nan=False)


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name}")


def _parse_line(text: str, lineno: int) -> tuple[TraceRecord | None, LineError | None]:
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        return None, LineError(lineno, "malformed-json", str(exc))
    if not isinstance(obj, dict):
        return None, LineError(lineno, "not-an-object", f"expected a JSON object, got {type(obj).__name__}")
    missing = [k for k in KEYS if k not in obj]
    if missing:
        return None, LineError(lineno, "missing-field", f"missing {', '.join(missing)}")
    extra = sorted(set(obj) - set(KEYS))
    if extra:
        return None, LineError(lineno, "unexpected-field", f"unexpected {', '.join(extra)}")
    t = obj["time"]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        return None, LineError(lineno, "type-mismatch", f"time must be a number, got {type(t).__name__}")
    for key in ("entity", "event"):
        if not isinstance(obj[key], str):
            return None, LineError(lineno, "type-mismatch", f"{key} must be a string")
        if not obj[key]:
            return None, LineError(lineno, "invalid-value", f"{key} must be non-empty")
    if not isinstance(obj["payload"], dict):
        return None, LineError(lineno, "type-mismatch", "payload must be an object")
    if not math.isfinite(t) or t < 0:
        return None, LineError(lineno, "invalid-value", f"time must be finite and >= 0, got {t!r}")
    return TraceRecord(float(t), obj["entity"], obj["event"], obj["payload"]), None


def parse_trace(lines: Iterable[str | bytes]) -> tuple[list[TraceRecord], TraceValidationReport]:
    """Parse JSONL lines; bad lines are reported and skipped, never fatal.

    Blank lines at the end are tolerated; a blank line followed by more
    content counts as an error.
    """
    records: list[TraceRecord] = []
    errors: list[LineError] = []
    pending_blank: list[int] = []
    for lineno, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                errors.extend(LineError(n, "blank-line", "blank line inside trace") for n in pending_blank)
                pending_blank = []
                errors.append(LineError(lineno, "encoding", str(exc)))
                continue
        text = raw.rstrip("\r\n")
        if not text.strip():
            pending_blank.append(lineno)
            continue
        errors.extend(LineError(n, "blank-line", "blank line inside trace") for n in pending_blank)
        pending_blank = []
        rec, err = _parse_line(text, lineno)
        if err is not None:
            errors.append(err)
        else:
            records.append(rec)
    errors.sort(key=lambda e: e.line)
    return records, TraceValidationReport(not errors, errors, len(records))


def parse_text(text: str | bytes) -> tuple[list[TraceRecord], TraceValidationReport]:
    if isinstance(text, bytes):
        return parse_trace(text.split(b"\n"))
    return parse_trace(text.split("\n"))


def check_monotonic(records: list[TraceRecord]) -> list[int]:
    return [i for i in range(1, len(records)) if records[i].time < records[i - 1].time]


class JsonlSink:
    """Writes records to a text stream as they are emitted."""

    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.count = 0

    def __call__(self, time: float, entity: str, event: str, payload: dict) -> None:
        self.stream.write(serialize_record(TraceRecord(time, entity, event, payload)) + "\n")
        self.count += 1

    def flush(self) -> None:
        self.stream.flush()


class ListSink:
    def __init__(self):
        self.records: list[TraceRecord] = []

    def __call__(self, time: float, entity: str, event: str, payload: dict) -> None:
        rec = TraceRecord(time, entity, event, payload)
        serialize_record(rec)
        self.records.append(rec)

    def lines(self) -> list[str]:
        return [serialize_record(r) for r in self.records]
