"""Streaming report ingestion over TCP.

Clients send one NDJSON report per line (the dataset wire schema with
``id`` holding the raw device id) and get a per-line ``ok`` or
``err <reason>`` reply. Device ids are anonymized at the door with a
keyed one-way digest; the raw id is never stored, logged, or served.

Frames are bounded by the server's receive clock, not client
timestamps (clients may skew; the client timestamp is preserved inside
the stored report for offline analysis). A closed frame is clustered,
gridded, and scored for alerts off the ingestion path, then published
as an immutable snapshot; readers on the snapshot port never observe a
half-built frame. The snapshot listener accepts two commands:
``snapshot`` (latest published snapshot) and ``flush`` (force-close
the current frame, wait for its analysis, return the fresh snapshot).

All per-line work happens on the event loop thread, so the frame under
assembly has a single logical writer no matter how many client
connections are open.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace

from .alerts import Alert, AlertState, AlertThresholds, evaluate_frame, format_alert_line
from .clustering import (
    ClusterSummary,
    DbscanParams,
    dbscan,
    format_summary_line,
    summarize_clusters,
)
from .density import DensityGrid, argmax_cell, build_density_grid
from .geo import GeoPoint, Polygon, point_in_polygon
from .model import (
    Report,
    ReportParseError,
    ReportRangeError,
    format_iso_ms,
    parse_report_line,
)

MAX_LINE_BYTES = 4096


def anonymize_id(raw_id: str, salt: bytes) -> str:
    """Keyed one-way 16-byte digest of a device id, hex encoded.

    Deterministic per (raw_id, salt); different salts give unrelated
    tokens, so datasets salted differently cannot be joined on ids.
    """
    if not raw_id:
        raise ValueError("raw_id must be non-empty")
    if not salt:
        raise ValueError("salt must be non-empty")
    return hashlib.blake2b(raw_id.encode("utf-8"), key=salt, digest_size=16).hexdigest()


@dataclass(frozen=True)
class IngestConfig:
    campus: Polygon
    listen_host: str = "127.0.0.1"
    listen_port: int = 7700
    snapshot_host: str = "127.0.0.1"
    snapshot_port: int = 7701
    window_s: float = 60.0
    salt: bytes | None = None  # None: fresh random salt at startup
    reject_outside: bool = False
    dbscan_params: DbscanParams = field(default_factory=DbscanParams)
    cell_size_m: float = 10.0
    thresholds: AlertThresholds = field(default_factory=AlertThresholds)

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValueError(f"window must be positive, got {self.window_s}")
        if self.salt is not None and not self.salt:
            raise ValueError("salt must be non-empty when given")
        if self.cell_size_m <= 0:
            raise ValueError(f"cell size must be positive, got {self.cell_size_m}")


@dataclass
class Counters:
    accepted: int = 0
    rejected: int = 0
    outside_campus: int = 0

    def copy(self) -> "Counters":
        return Counters(self.accepted, self.rejected, self.outside_campus)


@dataclass(frozen=True)
class Snapshot:
    """Analysis of the most recently closed frame, plus ingest counters."""

    window_s: float
    frame_index: int | None = None
    frame_ts_ms: int | None = None
    point_count: int = 0
    summaries: tuple[ClusterSummary, ...] = ()
    grid: DensityGrid | None = None
    alert_events: tuple[Alert, ...] = ()
    counters: Counters = field(default_factory=Counters)

    def to_json(self) -> str:
        if self.frame_ts_ms is None:
            frame_ts = "null"
        else:
            frame_ts = f'"{format_iso_ms(self.frame_ts_ms)}"'
        clusters = ",".join(
            format_summary_line(self.frame_ts_ms or 0, s) for s in self.summaries
        )
        if self.grid is None:
            grid = "null"
        else:
            row, col, value = (
                argmax_cell(self.grid) if self.grid.counts.size else (0, 0, 0.0)
            )
            grid = (
                f'{{"rows":{self.grid.rows},"cols":{self.grid.cols},'
                f'"cell_size_m":{self.grid.cell_size_m:g},'
                f'"total":{int(self.grid.total)},"dropped":{self.grid.dropped},'
                f'"max_row":{row},"max_col":{col},"max_value":{value:g}}}'
            )
        alerts = ",".join(format_alert_line(a) for a in self.alert_events)
        return (
            f'{{"frame_index":{self.frame_index if self.frame_index is not None else "null"},'
            f'"frame_ts":{frame_ts},"window_s":{self.window_s:g},'
            f'"points":{self.point_count},'
            f'"clusters":[{clusters}],"grid":{grid},"alerts":[{alerts}],'
            f'"counters":{{"accepted":{self.counters.accepted},'
            f'"rejected":{self.counters.rejected},'
            f'"outside_campus":{self.counters.outside_campus}}}}}'
        )


def _error_code(exc: ReportParseError) -> str:
    if exc.code:
        return exc.code
    if isinstance(exc, ReportRangeError):
        return f"{exc.field}_out_of_range"
    return f"bad_{exc.field or 'record'}"


class _IngestProtocol(asyncio.Protocol):
    """Line framing for one client connection; all work stays on the loop."""

    def __init__(self, server: "CrowdServer"):
        self.server = server
        self.transport: asyncio.Transport | None = None
        self._partial = b""

    def connection_made(self, transport: asyncio.BaseTransport) -> None:
        self.transport = transport  # type: ignore[assignment]

    def data_received(self, data: bytes) -> None:
        buf = self._partial + data
        lines = buf.split(b"\n")
        self._partial = lines.pop()
        replies = []
        fatal = False
        for line in lines:
            if len(line) > MAX_LINE_BYTES:
                self.server.counters.rejected += 1
                replies.append(b"err line_too_long\n")
                fatal = True
                break
            replies.append(self.server.handle_line(line))
        if not fatal and len(self._partial) > MAX_LINE_BYTES:
            self.server.counters.rejected += 1
            replies.append(b"err line_too_long\n")
            fatal = True
        if replies and self.transport is not None:
            self.transport.write(b"".join(replies))
        if fatal and self.transport is not None:
            self.transport.close()


class CrowdServer:
    """Ingest + snapshot listener pair around a single frame assembler."""

    def __init__(self, config: IngestConfig):
        self.config = config
        self.salt = config.salt if config.salt is not None else os.urandom(16)
        self.counters = Counters()
        self._campus = config.campus
        self._local_frame = config.campus.local_frame()
        self._current: dict[str, Report] = {}
        self._frame_index = 0
        self._frame_opened_ms = 0
        self._published = Snapshot(window_s=config.window_s)
        self._alert_state = AlertState()
        self._queue: asyncio.Queue = asyncio.Queue()
        self._ingest_server: asyncio.AbstractServer | None = None
        self._snapshot_server: asyncio.AbstractServer | None = None
        self._timer_task: asyncio.Task | None = None
        self._consumer_task: asyncio.Task | None = None

    # --- lifecycle ---

    async def start(self) -> None:
        loop = asyncio.get_running_loop()
        self._frame_opened_ms = int(time.time() * 1000)
        self._ingest_server = await loop.create_server(
            lambda: _IngestProtocol(self),
            self.config.listen_host,
            self.config.listen_port,
        )
        self._snapshot_server = await asyncio.start_server(
            self._handle_snapshot_client,
            self.config.snapshot_host,
            self.config.snapshot_port,
        )
        self._consumer_task = asyncio.create_task(self._consume_frames())
        self._timer_task = asyncio.create_task(self._frame_timer())

    async def stop(self) -> None:
        for task in (self._timer_task, self._consumer_task):
            if task is not None:
                task.cancel()
                try:
                    await task
                except asyncio.CancelledError:
                    pass
        for server in (self._ingest_server, self._snapshot_server):
            if server is not None:
                server.close()
                await server.wait_closed()

    async def __aenter__(self) -> "CrowdServer":
        await self.start()
        return self

    async def __aexit__(self, *exc) -> None:
        await self.stop()

    @property
    def ingest_address(self) -> tuple[str, int]:
        sock = self._ingest_server.sockets[0]  # type: ignore[union-attr]
        return sock.getsockname()[:2]

    @property
    def snapshot_address(self) -> tuple[str, int]:
        sock = self._snapshot_server.sockets[0]  # type: ignore[union-attr]
        return sock.getsockname()[:2]

    # --- ingestion path (event-loop thread only) ---

    def handle_line(self, line: bytes) -> bytes:
        line = line.rstrip(b"\r")
        if not line:
            self.counters.rejected += 1
            return b"err empty_line\n"
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError:
            self.counters.rejected += 1
            return b"err bad_encoding\n"
        try:
            report = parse_report_line(text)
        except ReportParseError as exc:
            self.counters.rejected += 1
            return f"err {_error_code(exc)}\n".encode()

        inside = point_in_polygon(self._campus, report.point)
        if not inside:
            self.counters.outside_campus += 1
            if self.config.reject_outside:
                self.counters.rejected += 1
                return b"err outside_campus\n"
        token = anonymize_id(report.id, self.salt)
        self._current[token] = replace(report, id=token)
        self.counters.accepted += 1
        return b"ok\n"

    # --- framing and analysis ---

    async def _frame_timer(self) -> None:
        while True:
            await asyncio.sleep(self.config.window_s)
            self._close_frame()

    def _close_frame(self) -> None:
        points = self._current
        self._current = {}
        frame_ts = self._frame_opened_ms
        index = self._frame_index
        self._frame_index += 1
        self._frame_opened_ms = int(time.time() * 1000)
        self._queue.put_nowait((index, frame_ts, points, self.counters.copy(), None))

    async def flush(self) -> Snapshot:
        """Force-close the current frame and wait for its snapshot."""
        if self._timer_task is not None:
            self._timer_task.cancel()
            try:
                await self._timer_task
            except asyncio.CancelledError:
                pass
        points = self._current
        self._current = {}
        frame_ts = self._frame_opened_ms
        index = self._frame_index
        self._frame_index += 1
        self._frame_opened_ms = int(time.time() * 1000)
        done: asyncio.Future = asyncio.get_running_loop().create_future()
        self._queue.put_nowait((index, frame_ts, points, self.counters.copy(), done))
        snapshot = await done
        self._timer_task = asyncio.create_task(self._frame_timer())
        return snapshot

    def _analyze(
        self, frame_ts_ms: int, points: list[GeoPoint]
    ) -> tuple[list[ClusterSummary], DensityGrid]:
        labels = dbscan(points, self.config.dbscan_params)
        summaries = summarize_clusters(points, labels, self._local_frame)
        grid = build_density_grid(
            points, self._campus.bbox, self.config.cell_size_m, self._local_frame
        )
        return summaries, grid

    async def _consume_frames(self) -> None:
        loop = asyncio.get_running_loop()
        while True:
            index, frame_ts, point_map, counters, done = await self._queue.get()
            points = [point_map[token].point for token in sorted(point_map)]
            summaries, grid = await loop.run_in_executor(
                None, self._analyze, frame_ts, points
            )
            events, self._alert_state = evaluate_frame(
                frame_ts, summaries, grid, self.config.thresholds,
                self._alert_state, self._local_frame,
            )
            self._published = Snapshot(
                window_s=self.config.window_s,
                frame_index=index,
                frame_ts_ms=frame_ts,
                point_count=len(points),
                summaries=tuple(summaries),
                grid=grid,
                alert_events=tuple(events),
                counters=counters,
            )
            if done is not None and not done.cancelled():
                done.set_result(self._published)

    @property
    def snapshot(self) -> Snapshot:
        """The latest published snapshot (empty until a frame closes)."""
        return self._published

    # --- snapshot listener ---

    async def _handle_snapshot_client(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            raw = await reader.readline()
            command = raw.decode("utf-8", "replace").strip()
            if command == "snapshot":
                payload = self._published.to_json()
            elif command == "flush":
                payload = (await self.flush()).to_json()
            else:
                payload = json.dumps({"error": "unknown_command"})
            writer.write(payload.encode("utf-8") + b"\n")
            await writer.drain()
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass


async def query_snapshot(host: str, port: int, command: str = "snapshot") -> dict:
    """One-shot client for the snapshot listener; returns the parsed JSON.

    The server replies with a single document and closes, so the reply
    is read to EOF (it can exceed line-buffer limits at campus scale).
    """
    reader, writer = await asyncio.open_connection(host, port)
    try:
        writer.write(command.encode("utf-8") + b"\n")
        await writer.drain()
        payload = await reader.read(-1)
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass
    return json.loads(payload)
