"""DBSCAN over geographic points with a uniform-grid neighbor index.

Two interchangeable label kernels implement the hot loop: a compiled
extension (``_kernel``, built from Cython) and a pure-Python fallback
(``_kernel_py``). The compiled one is preferred at import; set
``CROWDSENSE_PURE_PYTHON=1`` to force the fallback. Both produce
label vectors identical to the brute-force reference.

Two metrics are supported: ``degrees`` measures plain euclidean
distance in raw lon/lat degrees (eps in degrees) and ``haversine``
measures great-circle distance (eps in meters). Degree-space distance
overstates north-south separation relative to east-west by 1/cos(lat),
so haversine is the recommended mode; the degree mode exists because a
raw-degree eps is the conventional way these datasets are clustered.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geo import GeoPoint, LocalFrame, haversine_distance
from ._grid import (
    METRIC_CODES,
    METRIC_DEGREES,
    METRIC_HAVERSINE,
    GridIndex,
    cell_sizes,
)
from ._kernel_py import dbscan_labels as _labels_py
from ._reference import dbscan_labels_reference as _labels_reference

if os.environ.get("CROWDSENSE_PURE_PYTHON"):
    _labels_compiled = None
else:
    try:
        from ._kernel import dbscan_labels as _labels_compiled
    except ImportError:
        _labels_compiled = None

USING_COMPILED_KERNEL = _labels_compiled is not None
KERNEL_NAME = "compiled" if USING_COMPILED_KERNEL else "pure-python"

NOISE = -1

DEFAULT_EPS_DEGREES = 0.0007
DEFAULT_EPS_METERS = 75.0
DEFAULT_MIN_SAMPLES = 4

__all__ = [
    "NOISE",
    "METRIC_DEGREES",
    "METRIC_HAVERSINE",
    "DEFAULT_EPS_DEGREES",
    "DEFAULT_EPS_METERS",
    "DEFAULT_MIN_SAMPLES",
    "USING_COMPILED_KERNEL",
    "KERNEL_NAME",
    "DbscanParams",
    "ClusterSummary",
    "dbscan",
    "dbscan_arrays",
    "dbscan_reference",
    "build_grid_index",
    "summarize_clusters",
    "format_summary_line",
    "points_to_arrays",
]


@dataclass(frozen=True, slots=True)
class DbscanParams:
    """eps is in degrees for the ``degrees`` metric, meters for ``haversine``."""

    eps: float = DEFAULT_EPS_DEGREES
    min_samples: int = DEFAULT_MIN_SAMPLES
    metric: str = METRIC_DEGREES

    def __post_init__(self) -> None:
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")
        if self.metric not in METRIC_CODES:
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True, slots=True)
class ClusterSummary:
    """Per-cluster aggregate: population, centroid, and spread."""

    cluster_id: int
    count: int
    centroid: GeoPoint
    radius_m: float


def points_to_arrays(points: Sequence[GeoPoint]) -> tuple[np.ndarray, np.ndarray]:
    lons = np.fromiter((p.lon for p in points), dtype=np.float64, count=len(points))
    lats = np.fromiter((p.lat for p in points), dtype=np.float64, count=len(points))
    return lons, lats


def dbscan_arrays(lons: np.ndarray, lats: np.ndarray, params: DbscanParams) -> np.ndarray:
    """Label parallel lon/lat arrays; noise points get -1."""
    lons = np.ascontiguousarray(lons, dtype=np.float64)
    lats = np.ascontiguousarray(lats, dtype=np.float64)
    if lons.shape != lats.shape:
        raise ValueError("lon/lat arrays differ in length")
    if _labels_compiled is not None:
        if len(lons) == 0:
            return np.empty(0, dtype=np.int64)
        cell_w, cell_h = cell_sizes(params.metric, params.eps, lats)
        return _labels_compiled(
            lons, lats, params.eps, params.min_samples,
            METRIC_CODES[params.metric], cell_w, cell_h,
        )
    return _labels_py(lons, lats, params.eps, params.min_samples, params.metric)


def dbscan(points: Sequence[GeoPoint], params: DbscanParams) -> np.ndarray:
    """DBSCAN labels parallel to ``points`` (cluster ids from 0, noise -1).

    Deterministic: points are processed in input order, a border point
    joins the first cluster that reaches it, and ids are assigned in
    discovery order, so the label vector is a pure function of
    (points, params).
    """
    lons, lats = points_to_arrays(points)
    return dbscan_arrays(lons, lats, params)


def dbscan_reference(points: Sequence[GeoPoint], params: DbscanParams) -> np.ndarray:
    """Brute-force oracle with the same contract as :func:`dbscan`."""
    lons, lats = points_to_arrays(points)
    return _labels_reference(lons, lats, params.eps, params.min_samples, params.metric)


def build_grid_index(points: Sequence[GeoPoint], params: DbscanParams) -> GridIndex:
    """Standalone eps-ball index over ``points`` (closed-ball queries)."""
    lons, lats = points_to_arrays(points)
    return GridIndex(lons, lats, params.eps, params.metric)


def format_summary_line(frame_ts_ms: int, s: ClusterSummary) -> str:
    """One NDJSON cluster-summary record (no trailing newline).

    Byte-deterministic: degrees carry 7 fractional digits, radius 3.
    Shared by the offline CLI and the server snapshot so both render a
    given summary identically.
    """
    from ..model import format_iso_ms

    return (
        f'{{"frame_ts":"{format_iso_ms(frame_ts_ms)}","cluster":{s.cluster_id},'
        f'"count":{s.count},"centroid_lat":{s.centroid.lat:.7f},'
        f'"centroid_lon":{s.centroid.lon:.7f},"radius_m":{s.radius_m:.3f}}}'
    )


def summarize_clusters(
    points: Sequence[GeoPoint],
    labels: np.ndarray | Sequence[int],
    frame: LocalFrame,
) -> list[ClusterSummary]:
    """One summary per cluster id, in id order.

    The centroid is the arithmetic mean in the local planar frame,
    unprojected back to degrees; radius_m is the greatest member
    distance (haversine) to that centroid.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(points):
        raise ValueError(
            f"labels length {len(labels)} != points length {len(points)}"
        )
    if len(labels) == 0 or labels.max() < 0:
        return []
    lons, lats = points_to_arrays(points)
    xs, ys = frame.project_arrays(lons, lats)
    summaries = []
    for cid in range(int(labels.max()) + 1):
        members = np.nonzero(labels == cid)[0]
        centroid = frame.unproject(float(xs[members].mean()), float(ys[members].mean()))
        radius = 0.0
        for idx in members.tolist():
            d = haversine_distance(points[idx], centroid)
            if d > radius:
                radius = d
        summaries.append(
            ClusterSummary(
                cluster_id=cid, count=int(len(members)),
                centroid=centroid, radius_m=radius,
            )
        )
    return summaries
