"""Acceptance suite: the eight exit criteria, one test each, each printing
a PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`.

The shared scenario: 9,000 uniform background
people plus three 200-person, 20 m-sigma hotspots with centers several
kilometers apart (the criterion requires only >= 300 m), clustered at
eps = 0.0007 degrees, min_samples = 4.
"""

import asyncio
import functools
import json
import math
import time

import numpy as np
import pytest

from crowdsense.alerts import AlertState, AlertThresholds, evaluate_frame
from crowdsense.cli import main as cli_main
from crowdsense.clustering import (
    METRIC_DEGREES,
    METRIC_HAVERSINE,
    DbscanParams,
    dbscan,
    dbscan_arrays,
    dbscan_reference,
    summarize_clusters,
)
from crowdsense.clustering._reference import dbscan_labels_reference
from crowdsense.data import load_default_campus
from crowdsense.density import DensityGrid, argmax_cell, build_density_grid
from crowdsense.geo import (
    EARTH_RADIUS_M,
    GeoPoint,
    haversine_distance,
)
from crowdsense.ingest import CrowdServer, IngestConfig, anonymize_id, query_snapshot
from crowdsense.model import Report, read_dataset, window_frames, write_dataset
from crowdsense.replay import replay_dataset
from crowdsense.simulate import Hotspot, ScenarioConfig, run_scenario

CAMPUS = load_default_campus()
LOCAL = CAMPUS.local_frame()
HOTSPOT_CENTERS = (
    GeoPoint(-15.8650, -70.0450),
    GeoPoint(-15.8650, -69.9950),
    GeoPoint(-15.8000, -70.0400),
)
CLUSTER_PARAMS = DbscanParams(eps=0.0007, min_samples=4, metric=METRIC_DEGREES)
N_BACKGROUND = 9000
N_HOTSPOT = 200
HOTSPOT_SIGMA_M = 20.0
TOTAL = N_BACKGROUND + 3 * N_HOTSPOT
SEEDS = range(20)
CELL_M = 20.0


def criterion(number: int, name: str):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {number} {name}: FAIL")
                raise
            elapsed = time.perf_counter() - start
            print(f"ACCEPTANCE {number} {name}: PASS ({elapsed:.1f}s)")

        return wrapper

    return decorate


def crowd_scale_config(seed: int) -> ScenarioConfig:
    hotspots = tuple(
        Hotspot(center=c, sigma_m=HOTSPOT_SIGMA_M, count=N_HOTSPOT)
        for c in HOTSPOT_CENTERS
    )
    return ScenarioConfig(campus=CAMPUS, seed=seed, population=TOTAL,
                          duration_s=0.0, hotspots=hotspots)


@pytest.fixture(scope="module")
def crowd_scale_datasets():
    return {seed: run_scenario(crowd_scale_config(seed)) for seed in SEEDS}


# --- criterion 1: oracle equivalence -------------------------------------------

@criterion(1, "oracle equivalence, 200 random instances under a minute")
def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    instances = 0
    for metric in (METRIC_DEGREES, METRIC_HAVERSINE):
        for k in range(100):
            n = (0, 1, 2, 2000)[k] if k < 4 else int(rng.integers(3, 2001))
            span = rng.uniform(0.005, 0.05)
            lon0 = rng.uniform(-170, 170)
            lat0 = rng.uniform(-60, 60)
            lons = rng.uniform(lon0, lon0 + span, n)
            lats = rng.uniform(lat0, lat0 + span, n)
            if n >= 10 and rng.random() < 0.6:  # add blobs for cluster structure
                m = n // 5
                lons[:m] = rng.normal(lon0 + span / 2, span * 0.01, m)
                lats[:m] = rng.normal(lat0 + span / 2, span * 0.01, m)
            eps_deg = span * rng.uniform(0.01, 0.1)
            eps = eps_deg if metric == METRIC_DEGREES else eps_deg * 111_194.0
            params = DbscanParams(eps=eps, min_samples=int(rng.integers(1, 9)),
                                  metric=metric)
            got = dbscan_arrays(lons, lats, params)
            want = dbscan_labels_reference(lons, lats, params.eps,
                                           params.min_samples, metric)
            assert np.array_equal(got, want), (
                f"label mismatch: metric={metric} n={n} eps={eps} "
                f"min_samples={params.min_samples}"
            )
            instances += 1
    elapsed = time.perf_counter() - start
    assert instances >= 200
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s (budget 60s)"


# --- criterion 2: full-scale cluster recovery -----------------------------------

def _top3_match(ds) -> tuple[bool, float]:
    pts = [r.point for r in ds]
    labels = dbscan(pts, CLUSTER_PARAMS)
    summaries = summarize_clusters(pts, labels, LOCAL)
    top3 = sorted(summaries, key=lambda s: -s.count)[:3]
    if len(top3) < 3:
        return False, math.inf
    matched = set()
    worst = 0.0
    for s in top3:
        best = min(range(3),
                   key=lambda i: haversine_distance(s.centroid, HOTSPOT_CENTERS[i]))
        d = haversine_distance(s.centroid, HOTSPOT_CENTERS[best])
        worst = max(worst, d)
        if d <= 25.0:
            matched.add(best)
    return len(matched) == 3, worst


@criterion(2, "full-scale hotspot recovery over 20 seeds")
def test_criterion_2_cluster_recovery(crowd_scale_datasets):
    for a in range(3):
        for b in range(a + 1, 3):
            assert haversine_distance(HOTSPOT_CENTERS[a], HOTSPOT_CENTERS[b]) >= 300.0
    successes = 0
    for seed in SEEDS:
        ok, _ = _top3_match(crowd_scale_datasets[seed])
        successes += ok
    assert successes >= 0.9 * len(SEEDS), f"only {successes}/{len(SEEDS)} seeds recovered"


# --- criterion 3: heatmap consistency -----------------------------------------------

@criterion(3, "heatmap conservation and argmax near a hotspot")
def test_criterion_3_heatmap_consistency(crowd_scale_datasets):
    for seed in SEEDS:
        ds = crowd_scale_datasets[seed]
        pts = [r.point for r in ds]
        grid = build_density_grid(pts, CAMPUS.bbox, CELL_M, LOCAL)
        assert grid.total == TOTAL, f"seed {seed}: grid total {grid.total} != {TOTAL}"
        assert grid.dropped == 0
        row, col, _ = argmax_cell(grid)
        center = grid.cell_center(row, col, LOCAL)
        nearest = min(haversine_distance(center, c) for c in HOTSPOT_CENTERS)
        assert nearest <= 2 * CELL_M, (
            f"seed {seed}: argmax cell {nearest:.1f} m from nearest hotspot"
        )


# --- criterion 4: pipeline determinism ------------------------------------------------

@criterion(4, "cmd_pipeline byte-identical across runs")
def test_criterion_4_pipeline_determinism(tmp_path):
    args = ["pipeline", "--population", "1500", "--seed", "12345",
            "--duration", "120", "--tick", "60", "--walk-sigma", "3",
            "--hotspot=-15.8650,-70.0450,15,120", "--cell", "25", "--sigma", "1.0",
            "--min-cluster-count", "40", "--max-radius", "80"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli_main(args + ["--out-dir", str(out1)]) == 0
    assert cli_main(args + ["--out-dir", str(out2)]) == 0
    names = ["dataset.ndjson", "clusters.ndjson", "grid.csv", "grid_smoothed.csv",
             "grid.pgm", "grid_meta.txt", "alerts.ndjson"]
    for name in names:
        a, b = (out1 / name).read_bytes(), (out2 / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
    assert (out1 / "alerts.ndjson").stat().st_size > 0, "scenario should alert"


# --- criterion 5: geodesy accuracy ------------------------------------------------------

@criterion(5, "haversine vs law-of-cosines and the 1-degree closed form")
def test_criterion_5_geodesy_accuracy():
    rng = np.random.default_rng(55)
    for _ in range(10):
        a = GeoPoint(lat=rng.uniform(-70, 70), lon=rng.uniform(-179, 179))
        b = GeoPoint(lat=a.lat + rng.uniform(0.05, 0.9),
                     lon=a.lon + rng.uniform(0.05, 0.9))
        phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
        dl = math.radians(b.lon - a.lon)
        cos_angle = (math.sin(phi1) * math.sin(phi2)
                     + math.cos(phi1) * math.cos(phi2) * math.cos(dl))
        oracle = EARTH_RADIUS_M * math.acos(max(-1.0, min(1.0, cos_angle)))
        got = haversine_distance(a, b)
        assert abs(got - oracle) / oracle < 1e-6
    one_degree = haversine_distance(GeoPoint(0, 0), GeoPoint(1, 0))
    expected = math.pi * EARTH_RADIUS_M / 180.0
    assert abs(one_degree - expected) / expected < 1e-9


# --- criterion 6: online/offline equivalence ----------------------------------------------

@criterion(6, "serve/replay matches offline cmd_cluster under 64 connections")
def test_criterion_6_online_offline(tmp_path, crowd_scale_datasets):
    ds = crowd_scale_datasets[0]
    salt = b"acceptance-salt"
    window_s = 600.0

    async def drive():
        config = IngestConfig(
            campus=CAMPUS, listen_port=0, snapshot_port=0, window_s=window_s,
            salt=salt, dbscan_params=CLUSTER_PARAMS, cell_size_m=CELL_M,
        )
        async with CrowdServer(config) as server:
            host, port = server.ingest_address
            shost, sport = server.snapshot_address
            stats = await replay_dataset(ds, host, port, speed=0.0, connections=64)
            snap = await query_snapshot(shost, sport, "flush")
            return stats, snap

    stats, snap = asyncio.run(drive())
    # zero lost valid reports
    assert stats.sent == TOTAL
    assert stats.ok == TOTAL and stats.err == 0
    assert snap["counters"]["accepted"] == TOTAL
    assert snap["counters"]["rejected"] == 0
    assert snap["points"] == TOTAL  # distinct devices, no dedupe losses

    # offline: same salt, same frame boundaries (single frame), same params
    anon = sorted(
        (Report(id=anonymize_id(r.id, salt), lat=r.lat, lon=r.lon, ts_ms=r.ts_ms)
         for r in ds),
        key=lambda r: r.ts_ms,
    )
    offline_path = tmp_path / "anon.ndjson"
    write_dataset(anon, offline_path)
    summaries_path = tmp_path / "offline.ndjson"
    assert cli_main(["cluster", str(offline_path), "--window", str(window_s),
                     "--eps", "0.0007", "--min-samples", "4", "--metric", "degrees",
                     "--out", str(summaries_path)]) == 0
    offline = [json.loads(x) for x in summaries_path.read_text().splitlines()]

    online = snap["clusters"]
    assert len(online) == len(offline), (
        f"{len(online)} online clusters vs {len(offline)} offline"
    )
    for got, want in zip(online, offline):
        for key in ("cluster", "count", "centroid_lat", "centroid_lon", "radius_m"):
            assert got[key] == want[key], f"cluster field {key}: {got} != {want}"


# --- criterion 7: ingest throughput ------------------------------------------------------

@criterion(7, "ingest sustains 9000 accepted reports/second")
def test_criterion_7_throughput(crowd_scale_datasets):
    ds = crowd_scale_datasets[1]

    async def drive():
        config = IngestConfig(
            campus=CAMPUS, listen_port=0, snapshot_port=0, window_s=600.0,
            salt=b"throughput-salt", dbscan_params=CLUSTER_PARAMS, cell_size_m=CELL_M,
        )
        async with CrowdServer(config) as server:
            host, port = server.ingest_address
            return await replay_dataset(ds, host, port, speed=0.0, connections=16)

    stats = asyncio.run(drive())
    assert stats.ok == TOTAL
    assert stats.accepted_per_s >= 9000.0, (
        f"measured {stats.accepted_per_s:.0f} accepted/s (need 9000)"
    )


# --- criterion 8: alert hysteresis -------------------------------------------------------

@criterion(8, "hysteresis trace raised/ongoing/ongoing/cleared/raised")
def test_criterion_8_alert_hysteresis():
    thresholds = AlertThresholds(min_cluster_count=50, max_radius_m=30.0,
                                 cell_density_crit=25, exit_ratio=0.8)
    from crowdsense.clustering import ClusterSummary

    spot = GeoPoint(-15.8400, -70.0200)
    grid = DensityGrid(bbox=CAMPUS.bbox, cell_size_m=CELL_M,
                       counts=np.zeros((4, 4), dtype=np.int64))
    state = AlertState()
    observed = []
    for k, count in enumerate([55, 48, 41, 39, 55]):
        summaries = [ClusterSummary(cluster_id=0, count=count, centroid=spot,
                                    radius_m=10.0)]
        events, state = evaluate_frame(k * 60_000, summaries, grid, thresholds,
                                       state, LOCAL)
        assert len(events) == 1
        observed.append(events[0].state)
    assert observed == ["raised", "ongoing", "ongoing", "cleared", "raised"]
