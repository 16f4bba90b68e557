"""Ingest path: anonymization, wire protocol replies, counters, framing,
snapshots, and small-scale online/offline equivalence."""

import asyncio
import json

import pytest

from crowdsense.clustering import DbscanParams, dbscan, format_summary_line, summarize_clusters
from crowdsense.data import load_default_campus
from crowdsense.geo import GeoPoint, Polygon
from crowdsense.ingest import (
    MAX_LINE_BYTES,
    CrowdServer,
    IngestConfig,
    Snapshot,
    anonymize_id,
    query_snapshot,
)
from crowdsense.model import Report, format_report_line, parse_iso_utc, window_frames
from crowdsense.replay import replay_dataset
from crowdsense.simulate import Hotspot, ScenarioConfig, run_scenario

UNIT = Polygon([GeoPoint(0, 0), GeoPoint(0, 1), GeoPoint(1, 1), GeoPoint(1, 0)])
TS = "2024-05-01T12:00:00.000Z"


def unit_config(**kw) -> IngestConfig:
    defaults = dict(
        campus=UNIT, listen_port=0, snapshot_port=0, window_s=60.0,
        salt=b"test-salt", dbscan_params=DbscanParams(eps=0.01, min_samples=3),
        cell_size_m=1000.0,
    )
    defaults.update(kw)
    return IngestConfig(**defaults)


def line(rid="a1", lat=0.5, lon=0.5, ts=TS) -> bytes:
    return (
        json.dumps({"id": rid, "lat": lat, "lon": lon, "ts": ts}).encode() + b"\n"
    )


# --- anonymization ------------------------------------------------------------

def test_anonymize_deterministic():
    assert anonymize_id("device-1", b"salt") == anonymize_id("device-1", b"salt")


def test_anonymize_token_shape():
    token = anonymize_id("device-1", b"salt")
    assert len(token) == 32  # 16 bytes hex
    int(token, 16)  # valid hex


def test_anonymize_salt_sensitivity():
    assert anonymize_id("device-1", b"salt-a") != anonymize_id("device-1", b"salt-b")


def test_anonymize_rejects_empty():
    with pytest.raises(ValueError):
        anonymize_id("", b"salt")
    with pytest.raises(ValueError):
        anonymize_id("x", b"")


def test_anonymize_collision_free_over_large_corpus():
    # 128-bit digests: the birthday bound makes collisions over 1e6 ids
    # astronomically unlikely; any collision here is a real bug
    tokens = {anonymize_id(f"device-{i}", b"salt") for i in range(1_000_000)}
    assert len(tokens) == 1_000_000


# --- protocol unit tests (no sockets) -------------------------------------------

def test_handle_line_ok():
    server = CrowdServer(unit_config())
    assert server.handle_line(line()) == b"ok\n"
    assert server.counters.accepted == 1
    assert server.counters.rejected == 0


def test_handle_line_lat_out_of_range():
    server = CrowdServer(unit_config())
    assert server.handle_line(line(lat=95.0)) == b"err lat_out_of_range\n"
    assert server.counters.rejected == 1


def test_handle_line_reject_outside():
    server = CrowdServer(unit_config(reject_outside=True))
    assert server.handle_line(line(lat=2.0)) == b"err outside_campus\n"
    assert server.counters.outside_campus == 1
    assert server.counters.rejected == 1


def test_handle_line_outside_accepted_when_not_rejecting():
    server = CrowdServer(unit_config(reject_outside=False))
    assert server.handle_line(line(lat=2.0)) == b"ok\n"
    assert server.counters.outside_campus == 1
    assert server.counters.accepted == 1


def test_handle_line_error_reasons():
    server = CrowdServer(unit_config())
    assert server.handle_line(b"not json") == b"err bad_record\n"
    assert server.handle_line(line(rid="")) == b"err empty_id\n"
    assert server.handle_line(
        b'{"id":"a","lat":0.5,"lon":0.5,"ts":"not-a-time"}'
    ) == b"err bad_ts\n"
    assert server.handle_line(b"") == b"err empty_line\n"


def test_counter_accounting_identity():
    server = CrowdServer(unit_config())
    lines = [line(rid=f"d{i}") for i in range(20)]
    lines += [line(lat=95.0) for _ in range(5)]
    lines += [b"junk\n" for _ in range(3)]
    for raw in lines:
        server.handle_line(raw.rstrip(b"\n"))
    assert server.counters.accepted + server.counters.rejected == len(lines)


def test_frame_dedupes_by_device():
    server = CrowdServer(unit_config())
    server.handle_line(line(rid="a", lat=0.25))
    server.handle_line(line(rid="a", lat=0.75))
    assert server.counters.accepted == 2
    assert len(server._current) == 1
    (token, report), = server._current.items()
    assert report.lat == 0.75  # last received wins
    assert token == anonymize_id("a", b"test-salt")


def test_protocol_split_lines_and_oversize():
    class FakeTransport:
        def __init__(self):
            self.written = b""
            self.closed = False

        def write(self, data):
            self.written += data

        def close(self):
            self.closed = True

    from crowdsense.ingest import _IngestProtocol

    server = CrowdServer(unit_config())
    proto = _IngestProtocol(server)
    transport = FakeTransport()
    proto.connection_made(transport)

    payload = line(rid="a") + line(rid="b")
    proto.data_received(payload[:10])
    assert transport.written == b""  # no complete line yet
    proto.data_received(payload[10:])
    assert transport.written == b"ok\nok\n"
    assert not transport.closed

    big = b"x" * (MAX_LINE_BYTES + 1) + b"\n"
    proto.data_received(big)
    assert transport.written.endswith(b"err line_too_long\n")
    assert transport.closed


# --- snapshots (unit) ------------------------------------------------------------

def test_empty_snapshot_shape():
    snap = Snapshot(window_s=60.0)
    obj = json.loads(snap.to_json())
    assert obj["frame_ts"] is None
    assert obj["clusters"] == []
    assert obj["grid"] is None
    assert obj["counters"] == {"accepted": 0, "rejected": 0, "outside_campus": 0}


# --- live server integration ------------------------------------------------------

async def _send_lines(host, port, payload: bytes, expect_replies: int):
    reader, writer = await asyncio.open_connection(host, port)
    writer.write(payload)
    await writer.drain()
    replies = [await reader.readline() for _ in range(expect_replies)]
    writer.close()
    try:
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass
    return replies


def test_server_roundtrip_and_flush():
    async def scenario():
        async with CrowdServer(unit_config()) as server:
            host, port = server.ingest_address
            shost, sport = server.snapshot_address

            before = await query_snapshot(shost, sport)
            assert before["frame_ts"] is None
            assert before["counters"]["accepted"] == 0

            payload = b"".join(line(rid=f"d{i}", lat=0.5, lon=0.5 + i * 1e-4)
                               for i in range(10))
            replies = await _send_lines(host, port, payload, 10)
            assert replies == [b"ok\n"] * 10

            snap = await query_snapshot(shost, sport, "flush")
            assert snap["points"] == 10
            assert snap["counters"]["accepted"] == 10
            assert snap["counters"]["rejected"] == 0
            assert len(snap["clusters"]) == 1
            assert snap["clusters"][0]["count"] == 10
            assert snap["grid"]["total"] == 10
            return snap

    snap = asyncio.run(scenario())
    assert snap["frame_index"] == 0


def test_server_raw_ids_never_served():
    async def scenario():
        async with CrowdServer(unit_config()) as server:
            host, port = server.ingest_address
            shost, sport = server.snapshot_address
            payload = b"".join(
                line(rid=f"secret-device-{i}", lat=0.5, lon=0.5) for i in range(5)
            )
            await _send_lines(host, port, payload, 5)
            snap_text = (await query_snapshot(shost, sport, "flush"))
            return json.dumps(snap_text)

    text = asyncio.run(scenario())
    assert "secret-device" not in text


def test_server_unknown_snapshot_command():
    async def scenario():
        async with CrowdServer(unit_config()) as server:
            shost, sport = server.snapshot_address
            return await query_snapshot(shost, sport, "bogus")

    assert asyncio.run(scenario()) == {"error": "unknown_command"}


def test_online_offline_equivalence_small():
    campus = load_default_campus()
    hot = Hotspot(center=GeoPoint(-15.8650, -70.0450), sigma_m=15.0, count=60)
    cfg = ScenarioConfig(campus=campus, seed=5, population=400, duration_s=0.0,
                         hotspots=(hot,))
    ds = run_scenario(cfg)
    salt = b"equivalence-salt"
    params = DbscanParams()  # default degree-space operating point

    async def scenario():
        config = IngestConfig(
            campus=campus, listen_port=0, snapshot_port=0, window_s=300.0,
            salt=salt, dbscan_params=params, cell_size_m=20.0,
        )
        async with CrowdServer(config) as server:
            host, port = server.ingest_address
            shost, sport = server.snapshot_address
            stats = await replay_dataset(ds, host, port, speed=0.0, connections=8)
            assert stats.ok == len(ds)
            assert stats.err == 0
            return await query_snapshot(shost, sport, "flush")

    snap = asyncio.run(scenario())
    assert snap["points"] == len(ds)

    # offline: anonymize with the same salt, then window + cluster + summarize
    anon = [
        Report(id=anonymize_id(r.id, salt), lat=r.lat, lon=r.lon, ts_ms=r.ts_ms)
        for r in ds
    ]
    anon.sort(key=lambda r: r.ts_ms)
    frames = list(window_frames(anon, 300.0))
    assert len(frames) == 1
    pts = frames[0].geopoints()
    labels = dbscan(pts, params)
    offline = summarize_clusters(pts, labels, campus.local_frame())

    online = snap["clusters"]
    assert len(online) == len(offline)
    for got, want in zip(online, offline):
        rendered = json.loads(format_summary_line(0, want))
        assert got["cluster"] == rendered["cluster"]
        assert got["count"] == rendered["count"]
        assert got["centroid_lat"] == rendered["centroid_lat"]
        assert got["centroid_lon"] == rendered["centroid_lon"]
        assert got["radius_m"] == rendered["radius_m"]


def test_oversized_line_closes_connection_live():
    async def scenario():
        async with CrowdServer(unit_config()) as server:
            host, port = server.ingest_address
            reader, writer = await asyncio.open_connection(host, port)
            writer.write(b"y" * (MAX_LINE_BYTES + 100) + b"\n" + line())
            await writer.drain()
            reply = await reader.readline()
            rest = await reader.read()  # server closes after the error
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass
            return reply, rest

    reply, rest = asyncio.run(scenario())
    assert reply == b"err line_too_long\n"
    assert rest == b""
