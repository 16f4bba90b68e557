"""Density grids: per-cell population counts over a bounding box.

The grid is the heatmap substrate: darker/larger cells mean more
crowding. Row 0 is the northernmost row so exported rasters render
upright. Cells are addressed (row, col); a point increments exactly
one cell, with points on the south/east bbox edges clamped into the
last row/column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geo import BoundingBox, GeoPoint, LocalFrame

PGM_MAXVAL = 65535


@dataclass(frozen=True)
class DensityGrid:
    bbox: BoundingBox
    cell_size_m: float
    counts: np.ndarray  # rows x cols, row 0 = north
    dropped: int = 0  # points outside bbox, not binned

    def __post_init__(self) -> None:
        if self.counts.ndim != 2:
            raise ValueError("counts must be a 2-D matrix")

    @property
    def rows(self) -> int:
        return self.counts.shape[0]

    @property
    def cols(self) -> int:
        return self.counts.shape[1]

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def cell_center(self, row: int, col: int, frame: LocalFrame) -> GeoPoint:
        """Geographic center of a cell."""
        lat = self.bbox.max_lat - (row + 0.5) * self.cell_size_m / frame.meters_per_deg_lat
        lon = self.bbox.min_lon + (col + 0.5) * self.cell_size_m / frame.meters_per_deg_lon
        return GeoPoint(lat=lat, lon=lon)


def grid_shape(bbox: BoundingBox, cell_size_m: float, frame: LocalFrame) -> tuple[int, int]:
    height_m = (bbox.max_lat - bbox.min_lat) * frame.meters_per_deg_lat
    width_m = (bbox.max_lon - bbox.min_lon) * frame.meters_per_deg_lon
    rows = max(1, math.ceil(height_m / cell_size_m))
    cols = max(1, math.ceil(width_m / cell_size_m))
    return rows, cols


def build_density_grid(
    points: list[GeoPoint] | tuple[GeoPoint, ...],
    bbox: BoundingBox,
    cell_size_m: float,
    frame: LocalFrame,
) -> DensityGrid:
    """Bin points into a raw count grid; the total equals the points in bbox."""
    if cell_size_m <= 0:
        raise ValueError(f"cell size must be positive, got {cell_size_m}")
    if bbox.max_lat <= bbox.min_lat or bbox.max_lon <= bbox.min_lon:
        raise ValueError("degenerate bounding box")
    rows, cols = grid_shape(bbox, cell_size_m, frame)
    counts = np.zeros((rows, cols), dtype=np.int64)
    if not points:
        return DensityGrid(bbox=bbox, cell_size_m=cell_size_m, counts=counts)

    lons = np.fromiter((p.lon for p in points), dtype=np.float64, count=len(points))
    lats = np.fromiter((p.lat for p in points), dtype=np.float64, count=len(points))
    inside = (
        (lats >= bbox.min_lat) & (lats <= bbox.max_lat)
        & (lons >= bbox.min_lon) & (lons <= bbox.max_lon)
    )
    dropped = int((~inside).sum())
    lons, lats = lons[inside], lats[inside]
    r = np.floor((bbox.max_lat - lats) * frame.meters_per_deg_lat / cell_size_m).astype(np.int64)
    c = np.floor((lons - bbox.min_lon) * frame.meters_per_deg_lon / cell_size_m).astype(np.int64)
    np.clip(r, 0, rows - 1, out=r)
    np.clip(c, 0, cols - 1, out=c)
    np.add.at(counts, (r, c), 1)
    return DensityGrid(bbox=bbox, cell_size_m=cell_size_m, counts=counts, dropped=dropped)


def _gaussian_kernel(sigma_cells: float) -> np.ndarray:
    radius = max(1, math.ceil(3.0 * sigma_cells))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets * offsets) / (2.0 * sigma_cells * sigma_cells))
    return kernel / kernel.sum()


def _convolve_axis(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = (len(kernel) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    # symmetric padding pairs with the symmetric kernel to conserve mass
    padded = np.pad(values, pad, mode="symmetric")
    out = np.zeros_like(values, dtype=np.float64)
    length = values.shape[axis]
    for k, w in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(k, k + length)
        out += w * padded[tuple(sl)]
    return out


def gaussian_smooth(grid: DensityGrid, sigma_cells: float) -> DensityGrid:
    """Separable Gaussian blur, kernel truncated at 3 sigma and renormalized.

    Boundary handling is mirror-symmetric, which together with the
    renormalized kernel preserves total mass. sigma_cells = 0 returns
    the grid unchanged.
    """
    if sigma_cells < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma_cells}")
    if sigma_cells == 0:
        return grid
    kernel = _gaussian_kernel(sigma_cells)
    smoothed = _convolve_axis(grid.counts.astype(np.float64), kernel, axis=0)
    smoothed = _convolve_axis(smoothed, kernel, axis=1)
    return DensityGrid(
        bbox=grid.bbox, cell_size_m=grid.cell_size_m,
        counts=smoothed, dropped=grid.dropped,
    )


def argmax_cell(grid: DensityGrid) -> tuple[int, int, float]:
    """First maximal cell in row-major order: (row, col, value)."""
    if grid.counts.size == 0:
        raise ValueError("empty grid")
    flat = int(np.argmax(grid.counts))
    row, col = divmod(flat, grid.cols)
    return row, col, float(grid.counts[row, col])


# --- exports -----------------------------------------------------------

def _format_cell(value) -> str:
    if float(value) == int(value):
        return str(int(value))
    return repr(float(value))


def export_grid(grid: DensityGrid, path: str | Path, format: str = "csv") -> None:
    """Write the grid as CSV (row 0 first = north) or plain PGM (P2).

    PGM values are floor-rescaled so the grid maximum maps to 65535;
    an all-zero grid exports as all zeros.
    """
    path = Path(path)
    if format == "csv":
        lines = [
            ",".join(_format_cell(v) for v in row)
            for row in grid.counts.tolist()
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif format == "pgm":
        peak = float(grid.counts.max()) if grid.counts.size else 0.0
        if peak <= 0:
            scaled = np.zeros_like(grid.counts, dtype=np.int64)
        else:
            # multiply before dividing: 1 * 65535 / 3 floors to 21845 exactly,
            # while 1 / 3 * 65535 lands a hair under
            scaled = np.floor(grid.counts * float(PGM_MAXVAL) / peak).astype(np.int64)
        header = f"P2\n{grid.cols} {grid.rows}\n{PGM_MAXVAL}\n"
        body = "\n".join(" ".join(str(v) for v in row) for row in scaled.tolist())
        path.write_text(header + body + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown grid format {format!r}")


def write_grid_meta(
    grid: DensityGrid,
    path: str | Path,
    *,
    first_ts: str | None = None,
    last_ts: str | None = None,
    sigma_cells: float = 0.0,
) -> None:
    """Sidecar with the grid's provenance: bbox, cell size, time range, drops."""
    lines = [
        f"bbox_min_lat = {grid.bbox.min_lat:.7f}",
        f"bbox_max_lat = {grid.bbox.max_lat:.7f}",
        f"bbox_min_lon = {grid.bbox.min_lon:.7f}",
        f"bbox_max_lon = {grid.bbox.max_lon:.7f}",
        f"cell_size_m = {grid.cell_size_m:g}",
        f"rows = {grid.rows}",
        f"cols = {grid.cols}",
        f"total = {_format_cell(grid.total)}",
        f"dropped = {grid.dropped}",
        f"sigma_cells = {sigma_cells:g}",
        f"first_ts = {first_ts or ''}",
        f"last_ts = {last_ts or ''}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
