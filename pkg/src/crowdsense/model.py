"""Report records, time-window framing, and dataset files.

A report is one anonymized location sample: device id, position in
decimal degrees, and a UTC timestamp with millisecond precision.
Datasets are stored as NDJSON (one record per line) or CSV with the
header ``id,longitude,latitude,timestamp``.

Serialization is byte-deterministic: degrees are written with exactly
7 fractional digits and timestamps as ``YYYY-MM-DDTHH:MM:SS.mmmZ``.
Coordinates are expected to be quantized to 1e-7 degrees (the wire
precision) so that write → read is an identity.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .geo import GeoPoint

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
CSV_HEADER = ["id", "longitude", "latitude", "timestamp"]


class DatasetError(Exception):
    """Raised for unreadable or malformed dataset files."""


class ReportParseError(DatasetError):
    """A malformed record; carries the offending field and byte offset.

    ``code`` is a short machine-readable reason token (used verbatim in
    the ingest wire protocol's ``err <reason>`` replies).
    """

    def __init__(self, message: str, *, field: str | None = None,
                 offset: int | None = None, line_no: int | None = None,
                 code: str | None = None):
        self.field = field
        self.offset = offset
        self.line_no = line_no
        self.code = code
        prefix = f"line {line_no}: " if line_no is not None else ""
        suffix = f" (field {field!r}, byte {offset})" if field is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")


class ReportRangeError(ReportParseError):
    """A syntactically valid field whose value is out of range."""


@dataclass(frozen=True, slots=True)
class Report:
    """One location sample. ``ts_ms`` is milliseconds since the Unix epoch (UTC)."""

    id: str
    lat: float
    lon: float
    ts_ms: int

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("empty report id")
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range: {self.lon}")

    @property
    def point(self) -> GeoPoint:
        return GeoPoint(lat=self.lat, lon=self.lon)


Dataset = list[Report]


@dataclass(frozen=True, slots=True)
class Frame:
    """Latest position per device inside one [start_ms, end_ms) window.

    ``points`` holds at most one entry per device id, sorted by id, so a
    frame's point order does not depend on report arrival order.
    """

    start_ms: int
    end_ms: int
    points: tuple[tuple[str, GeoPoint], ...]

    def __post_init__(self) -> None:
        if self.start_ms >= self.end_ms:
            raise ValueError("frame start must precede frame end")

    def geopoints(self) -> list[GeoPoint]:
        return [p for _, p in self.points]


# --- timestamp helpers -------------------------------------------------

def parse_iso_utc(text: str) -> int:
    """Parse an ISO-8601 timestamp to epoch milliseconds.

    Accepts a trailing ``Z`` or a numeric offset; naive timestamps are
    treated as UTC. Sub-millisecond digits are truncated.
    """
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - EPOCH) // timedelta(milliseconds=1)


def format_iso_ms(ts_ms: int) -> str:
    """Render epoch milliseconds as ``YYYY-MM-DDTHH:MM:SS.mmmZ``."""
    dt = EPOCH + timedelta(milliseconds=ts_ms)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


# --- record parsing ----------------------------------------------------

def _byte_offset_of(line: str, needle: str) -> int:
    pos = line.find(needle)
    if pos < 0:
        return 0
    return len(line[:pos].encode("utf-8"))


def _check_ranges(line: str, rid: str, lat: float, lon: float) -> None:
    if rid == "":
        raise ReportParseError("empty id", field="id",
                               offset=_byte_offset_of(line, '"id"'), code="empty_id")
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise ReportRangeError(
            f"lat out of range: {lat}", field="lat",
            offset=_byte_offset_of(line, '"lat"'), code="lat_out_of_range",
        )
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise ReportRangeError(
            f"lon out of range: {lon}", field="lon",
            offset=_byte_offset_of(line, '"lon"'), code="lon_out_of_range",
        )


def parse_report_line(line: str, line_no: int | None = None) -> Report:
    """Parse one NDJSON record into a Report.

    Raises ReportParseError naming the bad field and its byte offset;
    range violations raise the ReportRangeError subclass.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ReportParseError(
            f"bad JSON: {exc.msg}",
            field="record",
            offset=len(line[: exc.pos].encode("utf-8")),
            line_no=line_no,
        ) from None
    if not isinstance(obj, dict):
        raise ReportParseError("record is not a JSON object", field="record",
                               offset=0, line_no=line_no)

    def _field(name: str, types: tuple[type, ...]):
        if name not in obj:
            raise ReportParseError(f"missing field {name!r}", field=name, offset=0,
                                   line_no=line_no)
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, types):
            raise ReportParseError(
                f"field {name!r} has wrong type {type(value).__name__}",
                field=name, offset=_byte_offset_of(line, f'"{name}"'), line_no=line_no,
            )
        return value

    rid = _field("id", (str,))
    lat = float(_field("lat", (int, float)))
    lon = float(_field("lon", (int, float)))
    ts_text = _field("ts", (str,))
    try:
        ts_ms = parse_iso_utc(ts_text)
    except ValueError as exc:
        raise ReportParseError(str(exc), field="ts",
                               offset=_byte_offset_of(line, '"ts"'), line_no=line_no) from None
    try:
        _check_ranges(line, rid, lat, lon)
    except ReportParseError as exc:
        raise type(exc)(
            str(exc), field=exc.field, offset=exc.offset,
            line_no=line_no, code=exc.code,
        ) from None
    return Report(id=rid, lat=lat, lon=lon, ts_ms=ts_ms)


def format_report_line(r: Report) -> str:
    """Render one NDJSON record (no trailing newline), byte-deterministic."""
    return (
        f'{{"id":{json.dumps(r.id)},"lat":{r.lat:.7f},"lon":{r.lon:.7f},'
        f'"ts":"{format_iso_ms(r.ts_ms)}"}}'
    )


def _parse_csv_row(row: list[str], line_no: int) -> Report:
    if len(row) != 4:
        raise ReportParseError(f"expected 4 columns, got {len(row)}", field="record",
                               offset=0, line_no=line_no)
    rid, lon_s, lat_s, ts_s = row
    try:
        lon = float(lon_s)
    except ValueError:
        raise ReportParseError(f"bad longitude {lon_s!r}", field="lon", offset=0,
                               line_no=line_no) from None
    try:
        lat = float(lat_s)
    except ValueError:
        raise ReportParseError(f"bad latitude {lat_s!r}", field="lat", offset=0,
                               line_no=line_no) from None
    try:
        ts_ms = parse_iso_utc(ts_s)
    except ValueError as exc:
        raise ReportParseError(str(exc), field="ts", offset=0, line_no=line_no) from None
    _check_ranges("", rid, lat, lon)
    return Report(id=rid, lat=lat, lon=lon, ts_ms=ts_ms)


# --- dataset files -----------------------------------------------------

def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        if format not in ("ndjson", "csv"):
            raise ValueError(f"unknown dataset format {format!r}")
        return format
    if path.suffix.lower() == ".csv":
        return "csv"
    return "ndjson"


def _read(path: Path, fmt: str, skip_bad: bool) -> tuple[Dataset, int]:
    reports: Dataset = []
    skipped = 0
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    with handle:
        if fmt == "csv":
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise ReportParseError("missing CSV header", field="record",
                                       offset=0, line_no=1) from None
            if header != CSV_HEADER:
                raise ReportParseError(
                    f"bad CSV header {header!r}, expected {CSV_HEADER!r}",
                    field="record", offset=0, line_no=1,
                )
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    reports.append(_parse_csv_row(row, line_no))
                except ReportParseError:
                    if not skip_bad:
                        raise
                    skipped += 1
        else:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.rstrip("\n").rstrip("\r")
                if not line:
                    continue
                try:
                    reports.append(parse_report_line(line, line_no=line_no))
                except ReportParseError:
                    if not skip_bad:
                        raise
                    skipped += 1
    return reports, skipped


def read_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Read a dataset, failing on the first malformed record (strict mode)."""
    path = Path(path)
    return _read(path, _infer_format(path, format), skip_bad=False)[0]


def read_dataset_lenient(path: str | Path, format: str | None = None) -> tuple[Dataset, int]:
    """Read a dataset skipping malformed records; returns (reports, skipped count)."""
    path = Path(path)
    return _read(path, _infer_format(path, format), skip_bad=True)


def write_dataset(ds: Iterable[Report], path: str | Path, format: str = "ndjson") -> int:
    """Write a dataset; returns the record count written."""
    if format not in ("ndjson", "csv"):
        raise ValueError(f"unknown dataset format {format!r}")
    path = Path(path)
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            if format == "csv":
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(CSV_HEADER)
                for r in ds:
                    writer.writerow(
                        [r.id, f"{r.lon:.7f}", f"{r.lat:.7f}", format_iso_ms(r.ts_ms)]
                    )
                    count += 1
            else:
                for r in ds:
                    handle.write(format_report_line(r))
                    handle.write("\n")
                    count += 1
    except OSError as exc:
        raise DatasetError(f"cannot write dataset {path}: {exc}") from exc
    return count


# --- windowing ---------------------------------------------------------

def window_frames(ds: Dataset, window_s: float, step_s: float | None = None) -> Iterator[Frame]:
    """Split a ts-sorted dataset into [t0 + k*step, t0 + k*step + window) frames.

    Within a frame the latest report per device wins (ties broken by
    dataset position). Gaps produce empty frames. With step == window
    the frames partition time, so every report lands in exactly one.
    """
    if step_s is None:
        step_s = window_s
    window_ms = round(window_s * 1000)
    step_ms = round(step_s * 1000)
    if window_ms <= 0:
        raise ValueError(f"window must be positive, got {window_s}")
    if step_ms <= 0 or step_ms > window_ms:
        raise ValueError(f"step must be in (0, window], got {step_s}")
    if not ds:
        return

    ts = [r.ts_ms for r in ds]
    for i in range(1, len(ts)):
        if ts[i] < ts[i - 1]:
            raise ValueError(f"dataset not sorted by timestamp at record {i}")

    t0 = ts[0]
    last = ts[-1]
    k = 0
    while t0 + k * step_ms <= last:
        start = t0 + k * step_ms
        end = start + window_ms
        lo = bisect.bisect_left(ts, start)
        hi = bisect.bisect_left(ts, end)
        best: dict[str, tuple[int, int]] = {}
        for idx in range(lo, hi):
            r = ds[idx]
            prev = best.get(r.id)
            if prev is None or (r.ts_ms, idx) >= prev:
                best[r.id] = (r.ts_ms, idx)
        points = tuple(
            (rid, ds[pos].point) for rid, (_, pos) in sorted(best.items())
        )
        yield Frame(start_ms=start, end_ms=end, points=points)
        k += 1
