"""Crowding alerts with hysteresis over per-frame cluster and cell measures.

A cluster alert enters when a cluster's population reaches
``min_cluster_count`` while its radius stays within ``max_radius_m``
(big diffuse blobs are not a crowd crush risk); a cell alert enters
when a raw grid cell reaches ``cell_density_crit``. An active alert is
matched frame-to-frame to the nearest current measure within
2 x max_radius_m (DBSCAN ids are not stable across frames, so matching
is by proximity) and persists until its measure falls below
exit_ratio x the entry threshold, which prevents flapping inside the
hysteresis band. Every frame emits one event per active alert:
``raised`` on entry, ``ongoing`` while held, ``cleared`` once on release.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

from .density import DensityGrid
from .geo import GeoPoint, LocalFrame, haversine_distance
from .model import format_iso_ms
from .clustering import ClusterSummary

KIND_CLUSTER = "cluster"
KIND_CELL = "cell"

SEVERITY_WATCH = "watch"
SEVERITY_WARNING = "warning"
SEVERITY_CRITICAL = "critical"

STATE_RAISED = "raised"
STATE_ONGOING = "ongoing"
STATE_CLEARED = "cleared"


@dataclass(frozen=True, slots=True)
class AlertThresholds:
    """Policy knobs; the defaults are campus-scale judgement calls, not
    measurements, and should be tuned per deployment."""

    min_cluster_count: int = 50
    max_radius_m: float = 30.0
    cell_density_crit: int = 25
    exit_ratio: float = 0.8

    def __post_init__(self) -> None:
        if self.min_cluster_count < 1:
            raise ValueError("min_cluster_count must be >= 1")
        if self.max_radius_m <= 0:
            raise ValueError("max_radius_m must be positive")
        if self.cell_density_crit < 1:
            raise ValueError("cell_density_crit must be >= 1")
        if not 0.0 < self.exit_ratio <= 1.0:
            raise ValueError("exit_ratio must be in (0, 1]")


@dataclass(frozen=True, slots=True)
class Alert:
    """One alert state transition, emitted once per active alert per frame."""

    alert_id: str
    frame_ts_ms: int
    kind: str
    state: str
    severity: str
    location: GeoPoint
    population: int


@dataclass(frozen=True, slots=True)
class _ActiveAlert:
    alert_id: str
    kind: str
    location: GeoPoint
    entry_threshold: int


@dataclass(frozen=True, slots=True)
class AlertState:
    """Immutable carry-over between frames."""

    active: tuple[_ActiveAlert, ...] = ()
    next_id: int = 1


def _severity(population: int, entry_threshold: int) -> str:
    if population >= 4 * entry_threshold:
        return SEVERITY_CRITICAL
    if population >= 2 * entry_threshold:
        return SEVERITY_WARNING
    return SEVERITY_WATCH


def severity_of(population: int, thresholds: AlertThresholds) -> str:
    """watch at [1x, 2x) the cluster entry threshold, warning at [2x, 4x),
    critical at >= 4x."""
    if population < thresholds.min_cluster_count:
        raise ValueError(
            f"population {population} below threshold {thresholds.min_cluster_count}"
        )
    return _severity(population, thresholds.min_cluster_count)


@dataclass(frozen=True, slots=True)
class _Candidate:
    kind: str
    location: GeoPoint
    measure: int
    order: int  # cluster id, or row-major cell index


def _collect_candidates(
    summaries: Iterable[ClusterSummary],
    grid: DensityGrid | None,
    thresholds: AlertThresholds,
    frame: LocalFrame,
) -> list[_Candidate]:
    out: list[_Candidate] = []
    for s in summaries:
        out.append(_Candidate(KIND_CLUSTER, s.centroid, s.count, s.cluster_id))
    if grid is not None and grid.counts.size:
        rows, cols = grid.counts.shape
        nz = grid.counts.nonzero()
        for r, c in zip(nz[0].tolist(), nz[1].tolist()):
            out.append(
                _Candidate(
                    KIND_CELL,
                    grid.cell_center(r, c, frame),
                    int(grid.counts[r, c]),
                    r * cols + c,
                )
            )
    return out


def _qualifies(cand: _Candidate, summaries_by_id: dict[int, ClusterSummary],
               thresholds: AlertThresholds) -> bool:
    if cand.kind == KIND_CLUSTER:
        summary = summaries_by_id[cand.order]
        return (
            summary.count >= thresholds.min_cluster_count
            and summary.radius_m <= thresholds.max_radius_m
        )
    return cand.measure >= thresholds.cell_density_crit


def evaluate_frame(
    frame_ts_ms: int,
    summaries: list[ClusterSummary],
    grid: DensityGrid | None,
    thresholds: AlertThresholds,
    state: AlertState,
    frame: LocalFrame,
    *,
    grid_frame_ts_ms: int | None = None,
) -> tuple[list[Alert], AlertState]:
    """Advance the alert state machine by one frame.

    Returns the frame's events (raised/ongoing/cleared) and the next
    state. Deterministic given the frame stream and thresholds: active
    alerts are matched in creation order, each to its nearest unclaimed
    measure of the same kind within 2 x max_radius_m.
    """
    if grid_frame_ts_ms is not None and grid_frame_ts_ms != frame_ts_ms:
        raise ValueError(
            f"cluster frame ts {frame_ts_ms} != grid frame ts {grid_frame_ts_ms}"
        )
    candidates = _collect_candidates(summaries, grid, thresholds, frame)
    summaries_by_id = {s.cluster_id: s for s in summaries}
    match_radius = 2.0 * thresholds.max_radius_m

    events: list[Alert] = []
    surviving: list[_ActiveAlert] = []
    claimed: set[int] = set()

    for alert in state.active:
        best_idx = -1
        best_dist = match_radius
        for idx, cand in enumerate(candidates):
            if idx in claimed or cand.kind != alert.kind:
                continue
            d = haversine_distance(alert.location, cand.location)
            if d < best_dist or (best_idx < 0 and d == best_dist):
                best_idx = idx
                best_dist = d
        exit_level = thresholds.exit_ratio * alert.entry_threshold
        if best_idx >= 0 and candidates[best_idx].measure >= exit_level:
            cand = candidates[best_idx]
            claimed.add(best_idx)
            moved = replace(alert, location=cand.location)
            surviving.append(moved)
            events.append(
                Alert(
                    alert_id=alert.alert_id,
                    frame_ts_ms=frame_ts_ms,
                    kind=alert.kind,
                    state=STATE_ONGOING,
                    severity=_severity(cand.measure, alert.entry_threshold)
                    if cand.measure >= alert.entry_threshold
                    else SEVERITY_WATCH,
                    location=cand.location,
                    population=cand.measure,
                )
            )
        else:
            if best_idx >= 0:
                claimed.add(best_idx)
                last_measure = candidates[best_idx].measure
                location = candidates[best_idx].location
            else:
                last_measure = 0
                location = alert.location
            events.append(
                Alert(
                    alert_id=alert.alert_id,
                    frame_ts_ms=frame_ts_ms,
                    kind=alert.kind,
                    state=STATE_CLEARED,
                    severity=SEVERITY_WATCH,
                    location=location,
                    population=last_measure,
                )
            )

    next_id = state.next_id
    for idx, cand in enumerate(candidates):
        if idx in claimed or not _qualifies(cand, summaries_by_id, thresholds):
            continue
        entry = (
            thresholds.min_cluster_count
            if cand.kind == KIND_CLUSTER
            else thresholds.cell_density_crit
        )
        alert_id = f"a{next_id:06d}"
        next_id += 1
        surviving.append(
            _ActiveAlert(
                alert_id=alert_id, kind=cand.kind,
                location=cand.location, entry_threshold=entry,
            )
        )
        events.append(
            Alert(
                alert_id=alert_id,
                frame_ts_ms=frame_ts_ms,
                kind=cand.kind,
                state=STATE_RAISED,
                severity=_severity(cand.measure, entry),
                location=cand.location,
                population=cand.measure,
            )
        )
    return events, AlertState(active=tuple(surviving), next_id=next_id)


def format_alert_line(a: Alert) -> str:
    """One NDJSON alert-log record (no trailing newline), byte-deterministic."""
    return (
        f'{{"frame_ts":"{format_iso_ms(a.frame_ts_ms)}","alert_id":{json.dumps(a.alert_id)},'
        f'"kind":"{a.kind}","state":"{a.state}","severity":"{a.severity}",'
        f'"lat":{a.location.lat:.7f},"lon":{a.location.lon:.7f},'
        f'"population":{a.population}}}'
    )
