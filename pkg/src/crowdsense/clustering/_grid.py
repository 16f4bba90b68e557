"""Uniform hash-grid neighbor index shared by the clustering kernels.

Cells are sized so that any two points within ``eps`` of each other are
never more than one cell apart on either axis; a 3x3 cell scan plus an
exact distance filter therefore returns exactly the closed eps-ball.

For the haversine metric the cell edge is derived from the inverse
haversine bounds: a central angle theta satisfies |dlat| <= theta and
sin(|dlon|/2) <= sin(theta/2) / min(cos(lat)), so the longitude edge
uses the smallest cosine over the data's latitude span.
"""

from __future__ import annotations

import math

import numpy as np

from ..geo import EARTH_RADIUS_M, METERS_PER_DEG_LAT

METRIC_DEGREES = "degrees"
METRIC_HAVERSINE = "haversine"
METRIC_CODES = {METRIC_DEGREES: 0, METRIC_HAVERSINE: 1}

# Guards against floor() landing a borderline pair two cells apart after
# last-ulp rounding in the distance predicate.
_CELL_MARGIN = 1.0 + 1e-9

_MAX_CELLS_PER_AXIS = 2**31


def hav_threshold(eps_m: float) -> float:
    """Squared-sine threshold equivalent to haversine distance <= eps_m."""
    half_angle = min(eps_m / (2.0 * EARTH_RADIUS_M), math.pi / 2.0)
    s = math.sin(half_angle)
    return s * s


def cell_sizes(metric: str, eps: float, lats: np.ndarray) -> tuple[float, float]:
    """Cell edge lengths (lon degrees, lat degrees) covering the eps-ball."""
    if metric == METRIC_DEGREES:
        return eps * _CELL_MARGIN, eps * _CELL_MARGIN
    theta = eps / EARTH_RADIUS_M  # central angle, radians
    cell_h = min(math.degrees(theta), 180.0) * _CELL_MARGIN
    abs_lat = max(abs(float(lats.min())), abs(float(lats.max()))) if lats.size else 0.0
    min_cos = math.cos(math.radians(min(abs_lat, 90.0)))
    sin_half = math.sin(min(theta / 2.0, math.pi / 2.0))
    if min_cos <= 1e-9 or sin_half >= min_cos:
        cell_w = 360.0
    else:
        cell_w = math.degrees(2.0 * math.asin(sin_half / min_cos)) * _CELL_MARGIN
    return cell_w, cell_h


def cell_coords(
    lons: np.ndarray, lats: np.ndarray, cell_w: float, cell_h: float
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Per-point (col, row) cell coordinates plus grid extents."""
    x0 = float(lons.min())
    y0 = float(lats.min())
    cols = np.floor((lons - x0) / cell_w).astype(np.int64)
    rows = np.floor((lats - y0) / cell_h).astype(np.int64)
    ncols = int(cols.max()) + 1
    nrows = int(rows.max()) + 1
    if ncols > _MAX_CELLS_PER_AXIS or nrows > _MAX_CELLS_PER_AXIS:
        raise ValueError("eps is too small relative to the coordinate span")
    return cols, rows, ncols, nrows


class GridIndex:
    """Hash grid over lon/lat points answering closed eps-ball queries."""

    def __init__(self, lons: np.ndarray, lats: np.ndarray, eps: float, metric: str):
        if metric not in METRIC_CODES:
            raise ValueError(f"unknown metric {metric!r}")
        self.lons = np.ascontiguousarray(lons, dtype=np.float64)
        self.lats = np.ascontiguousarray(lats, dtype=np.float64)
        self.eps = float(eps)
        self.metric = metric
        n = self.lons.shape[0]
        self._cells: dict[int, np.ndarray] = {}
        if metric == METRIC_HAVERSINE:
            self._phi = np.radians(self.lats)
            self._lam = np.radians(self.lons)
            self._cos_phi = np.cos(self._phi)
            self._hav_thresh = hav_threshold(self.eps)
        if n == 0:
            self._cell_w = self._cell_h = 1.0
            self._x0 = self._y0 = 0.0
            self._ncols = self._nrows = 0
            return
        self._cell_w, self._cell_h = cell_sizes(metric, self.eps, self.lats)
        cols, rows, self._ncols, self._nrows = cell_coords(
            self.lons, self.lats, self._cell_w, self._cell_h
        )
        self._x0 = float(self.lons.min())
        self._y0 = float(self.lats.min())
        keys = rows * self._ncols + cols
        order = np.argsort(keys, kind="stable")
        skeys = keys[order]
        boundary = np.empty(n, dtype=bool)
        boundary[0] = True
        boundary[1:] = skeys[1:] != skeys[:-1]
        starts = np.nonzero(boundary)[0]
        chunks = np.split(order, starts[1:])
        self._cells = {int(skeys[s]): chunk for s, chunk in zip(starts, chunks)}

    def _ball_mask(self, cand: np.ndarray, lon: float, lat: float) -> np.ndarray:
        if self.metric == METRIC_DEGREES:
            dx = self.lons[cand] - lon
            dy = self.lats[cand] - lat
            return dx * dx + dy * dy <= self.eps * self.eps
        phi0 = math.radians(lat)
        lam0 = math.radians(lon)
        sdphi = np.sin((self._phi[cand] - phi0) * 0.5)
        sdlam = np.sin((self._lam[cand] - lam0) * 0.5)
        h = sdphi * sdphi + math.cos(phi0) * self._cos_phi[cand] * sdlam * sdlam
        return h <= self._hav_thresh

    def query(self, lon: float, lat: float) -> np.ndarray:
        """Indices of all points within eps of (lon, lat), ascending."""
        if not self._cells:
            return np.empty(0, dtype=np.int64)
        col = int(math.floor((lon - self._x0) / self._cell_w))
        row = int(math.floor((lat - self._y0) / self._cell_h))
        gathered = []
        for dr in (-1, 0, 1):
            r = row + dr
            if r < 0 or r >= self._nrows:
                continue
            base = r * self._ncols
            for dc in (-1, 0, 1):
                c = col + dc
                if c < 0 or c >= self._ncols:
                    continue
                hit = self._cells.get(base + c)
                if hit is not None:
                    gathered.append(hit)
        if not gathered:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(gathered)
        result = cand[self._ball_mask(cand, lon, lat)]
        result.sort()
        return result
