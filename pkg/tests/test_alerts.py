"""Alert engine: severity ladder, hysteresis transitions, matching."""

import json

import numpy as np
import pytest

from crowdsense.alerts import (
    STATE_CLEARED,
    STATE_ONGOING,
    STATE_RAISED,
    AlertState,
    AlertThresholds,
    evaluate_frame,
    format_alert_line,
    severity_of,
)
from crowdsense.clustering import ClusterSummary
from crowdsense.density import DensityGrid
from crowdsense.geo import BoundingBox, GeoPoint, LocalFrame

FRAME = LocalFrame(origin=GeoPoint(-15.84, -70.02))
BBOX = BoundingBox(min_lat=-15.85, max_lat=-15.83, min_lon=-70.03, max_lon=-70.01)
SPOT = GeoPoint(-15.84, -70.02)


def summary(count: int, radius: float = 10.0, center: GeoPoint = SPOT,
            cid: int = 0) -> ClusterSummary:
    return ClusterSummary(cluster_id=cid, count=count, centroid=center, radius_m=radius)


def zero_grid() -> DensityGrid:
    return DensityGrid(bbox=BBOX, cell_size_m=10.0,
                       counts=np.zeros((4, 4), dtype=np.int64))


def run_sequence(counts, thresholds, radius=10.0):
    """Feed a scripted per-frame cluster count; collect state strings."""
    state = AlertState()
    seen = []
    for k, count in enumerate(counts):
        summaries = [summary(count, radius)] if count > 0 else []
        events, state = evaluate_frame(
            k * 60_000, summaries, zero_grid(), thresholds, state, FRAME
        )
        seen.append([(e.alert_id, e.state) for e in events])
    return seen


THRESH = AlertThresholds(min_cluster_count=50, max_radius_m=30.0,
                         cell_density_crit=25, exit_ratio=0.8)


# --- severity ----------------------------------------------------------------

def test_severity_boundaries():
    assert severity_of(50, THRESH) == "watch"
    assert severity_of(99, THRESH) == "watch"
    assert severity_of(100, THRESH) == "warning"
    assert severity_of(199, THRESH) == "warning"
    assert severity_of(200, THRESH) == "critical"


def test_severity_below_threshold_rejected():
    with pytest.raises(ValueError):
        severity_of(49, THRESH)


def test_threshold_validation():
    with pytest.raises(ValueError):
        AlertThresholds(min_cluster_count=0)
    with pytest.raises(ValueError):
        AlertThresholds(exit_ratio=0.0)
    with pytest.raises(ValueError):
        AlertThresholds(exit_ratio=1.5)


# --- core rules -----------------------------------------------------------------

def test_no_input_no_alerts():
    events, state = evaluate_frame(0, [], zero_grid(), THRESH, AlertState(), FRAME)
    assert events == []
    assert state.active == ()


def test_qualifying_cluster_raises():
    events, _ = evaluate_frame(0, [summary(80, 25.0)], zero_grid(), THRESH,
                               AlertState(), FRAME)
    assert [e.state for e in events] == [STATE_RAISED]
    assert events[0].kind == "cluster"
    assert events[0].population == 80


def test_large_radius_cluster_does_not_raise():
    events, _ = evaluate_frame(0, [summary(80, 45.0)], zero_grid(), THRESH,
                               AlertState(), FRAME)
    assert events == []


def test_hysteresis_holds_above_exit():
    # active at 55; drops to 48 with release level 0.8*50 = 40: still ongoing
    seen = run_sequence([55, 48], THRESH)
    assert seen[0] == [("a000001", STATE_RAISED)]
    assert seen[1] == [("a000001", STATE_ONGOING)]


def test_criterion_sequence_raised_ongoing_cleared_raised():
    # hand-traced: entry 50, exit 40; 55 raises, 48 and 41 hold, 39 clears,
    # 55 raises a fresh alert id
    seen = run_sequence([55, 48, 41, 39, 55], THRESH)
    assert seen == [
        [("a000001", STATE_RAISED)],
        [("a000001", STATE_ONGOING)],
        [("a000001", STATE_ONGOING)],
        [("a000001", STATE_CLEARED)],
        [("a000002", STATE_RAISED)],
    ]


def test_vanished_cluster_clears_with_zero_population():
    state = AlertState()
    _, state = evaluate_frame(0, [summary(60)], zero_grid(), THRESH, state, FRAME)
    events, state = evaluate_frame(60_000, [], zero_grid(), THRESH, state, FRAME)
    assert [e.state for e in events] == [STATE_CLEARED]
    assert events[0].population == 0
    assert state.active == ()


def test_no_flapping_within_band():
    # oscillating inside (exit, entry) after the raise: never a second raise
    seen = run_sequence([55, 45, 49, 41, 48, 44], THRESH)
    states = [s for frame in seen for (_, s) in frame]
    assert states == [STATE_RAISED] + [STATE_ONGOING] * 5
    assert states.count(STATE_RAISED) == 1


def test_every_cleared_preceded_by_raised():
    rng = np.random.default_rng(3)
    counts = rng.integers(0, 120, size=60).tolist()
    seen = run_sequence(counts, THRESH)
    open_ids = set()
    for frame in seen:
        for alert_id, state in frame:
            if state == STATE_RAISED:
                assert alert_id not in open_ids
                open_ids.add(alert_id)
            elif state == STATE_ONGOING:
                assert alert_id in open_ids
            elif state == STATE_CLEARED:
                assert alert_id in open_ids
                open_ids.remove(alert_id)


def test_determinism():
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 120, size=40).tolist()
    assert run_sequence(counts, THRESH) == run_sequence(counts, THRESH)


def test_matching_by_proximity_not_cluster_id():
    # same physical crowd, different DBSCAN id next frame: matched as ongoing
    state = AlertState()
    _, state = evaluate_frame(
        0, [summary(60, cid=0)], zero_grid(), THRESH, state, FRAME
    )
    nearby = GeoPoint(SPOT.lat + 0.0001, SPOT.lon)  # ~11 m away
    events, _ = evaluate_frame(
        60_000, [summary(58, center=nearby, cid=3)], zero_grid(), THRESH, state, FRAME
    )
    assert [e.state for e in events] == [STATE_ONGOING]


def test_far_cluster_is_new_alert():
    state = AlertState()
    _, state = evaluate_frame(0, [summary(60)], zero_grid(), THRESH, state, FRAME)
    far = GeoPoint(SPOT.lat + 0.01, SPOT.lon)  # ~1.1 km >> 2*max_radius
    events, _ = evaluate_frame(
        60_000, [summary(70, center=far)], zero_grid(), THRESH, state, FRAME
    )
    states = sorted(e.state for e in events)
    assert states == [STATE_CLEARED, STATE_RAISED]


def test_cell_alerts_from_grid():
    counts = np.zeros((4, 4), dtype=np.int64)
    counts[2, 1] = 30  # >= cell_density_crit 25
    grid = DensityGrid(bbox=BBOX, cell_size_m=10.0, counts=counts)
    events, _ = evaluate_frame(0, [], grid, THRESH, AlertState(), FRAME)
    assert [e.kind for e in events] == ["cell"]
    assert events[0].population == 30
    assert events[0].state == STATE_RAISED


def test_mismatched_frame_ts_rejected():
    with pytest.raises(ValueError):
        evaluate_frame(0, [], zero_grid(), THRESH, AlertState(), FRAME,
                       grid_frame_ts_ms=60_000)


def test_alert_line_roundtrip():
    events, _ = evaluate_frame(0, [summary(60)], zero_grid(), THRESH,
                               AlertState(), FRAME)
    line = format_alert_line(events[0])
    obj = json.loads(line)
    assert obj["alert_id"] == "a000001"
    assert obj["state"] == "raised"
    assert obj["kind"] == "cluster"
    assert obj["population"] == 60
    assert obj["frame_ts"] == "1970-01-01T00:00:00.000Z"
