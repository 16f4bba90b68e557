"""Replay a dataset against a running ingest server.

Reports are split round-robin across N concurrent connections. With
speed > 0 each report is scheduled at its original offset from the
first report divided by the speed factor; speed = 0 streams flat out
with no sleeps. Writes are pipelined: replies are consumed by a
separate reader task per connection, so throughput is not bound by
per-line round trips. The returned stats are the accounting source for
throughput measurements (accepted replies per wall-clock second).
"""

from __future__ import annotations

import asyncio
import time
from dataclasses import dataclass

from .model import Dataset, format_report_line

_FLAT_OUT_CHUNK = 1000


@dataclass
class ReplayStats:
    sent: int
    ok: int
    err: int
    elapsed_s: float

    @property
    def accepted_per_s(self) -> float:
        return self.ok / self.elapsed_s if self.elapsed_s > 0 else 0.0


async def _drain_replies(reader: asyncio.StreamReader, expected: int) -> tuple[int, int]:
    ok = err = 0
    for _ in range(expected):
        line = await reader.readline()
        if not line:
            break
        if line.startswith(b"ok"):
            ok += 1
        else:
            err += 1
    return ok, err


async def _run_connection(
    reports: Dataset,
    host: str,
    port: int,
    speed: float,
    t0_ms: int,
    start_monotonic: float,
) -> tuple[int, int]:
    if not reports:
        return 0, 0
    reader, writer = await asyncio.open_connection(host, port)
    reply_task = asyncio.create_task(_drain_replies(reader, len(reports)))
    try:
        if speed > 0:
            for r in reports:
                due = start_monotonic + (r.ts_ms - t0_ms) / 1000.0 / speed
                delay = due - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                writer.write(format_report_line(r).encode("utf-8") + b"\n")
                await writer.drain()
        else:
            for i in range(0, len(reports), _FLAT_OUT_CHUNK):
                chunk = reports[i : i + _FLAT_OUT_CHUNK]
                writer.write(
                    "".join(format_report_line(r) + "\n" for r in chunk).encode("utf-8")
                )
                await writer.drain()
        ok, err = await reply_task
    finally:
        reply_task.cancel()
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass
    return ok, err


async def replay_dataset(
    ds: Dataset,
    host: str,
    port: int,
    *,
    speed: float = 1.0,
    connections: int = 1,
) -> ReplayStats:
    """Stream a dataset to an ingest listener; returns delivery accounting."""
    if speed < 0:
        raise ValueError(f"speed must be >= 0, got {speed}")
    if connections < 1:
        raise ValueError(f"connections must be >= 1, got {connections}")
    if not ds:
        return ReplayStats(sent=0, ok=0, err=0, elapsed_s=0.0)
    t0_ms = ds[0].ts_ms
    parts = [ds[i::connections] for i in range(connections)]
    start = time.monotonic()
    results = await asyncio.gather(
        *(_run_connection(part, host, port, speed, t0_ms, start) for part in parts)
    )
    elapsed = time.monotonic() - start
    ok = sum(r[0] for r in results)
    err = sum(r[1] for r in results)
    return ReplayStats(sent=len(ds), ok=ok, err=err, elapsed_s=elapsed)
