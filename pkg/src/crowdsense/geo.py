"""Geodesy primitives: spherical distance, a local planar frame, and
polygon containment for a campus boundary.

All coordinates are WGS-84 latitude/longitude in decimal degrees. The
earth is modelled as a sphere of radius 6,371,000 m, which is accurate
to well under 0.5% and more than enough at campus scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEG_LAT = math.pi * EARTH_RADIUS_M / 180.0


class GeometryError(ValueError):
    """Raised for invalid geometric values (bad coordinates, degenerate polygons)."""


@dataclass(frozen=True, slots=True)
class GeoPoint:
    """A point on the sphere, in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        # normalize numpy scalars etc. to plain floats
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise GeometryError(f"non-finite coordinate: lat={self.lat} lon={self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise GeometryError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise GeometryError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True, slots=True)
class BoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self) -> None:
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise GeometryError("inverted bounding box")

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.min_lat <= p.lat <= self.max_lat
            and self.min_lon <= p.lon <= self.max_lon
        )


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True, slots=True)
class LocalFrame:
    """Equirectangular planar frame anchored at ``origin``.

    x is meters east of the origin, y is meters north. Longitude is
    scaled by cos(origin latitude); the approximation is locally
    isometric (error < 0.1% within a few hundred meters).
    """

    origin: GeoPoint
    meters_per_deg_lat: float = field(init=False, default=METERS_PER_DEG_LAT)
    meters_per_deg_lon: float = field(init=False)

    def __post_init__(self) -> None:
        m_lon = METERS_PER_DEG_LAT * math.cos(math.radians(self.origin.lat))
        if m_lon <= 0.0:
            raise GeometryError(f"frame origin too close to a pole: lat={self.origin.lat}")
        object.__setattr__(self, "meters_per_deg_lon", m_lon)

    def project(self, p: GeoPoint) -> tuple[float, float]:
        """Project a point to (x east, y north) meters relative to the origin."""
        x = (p.lon - self.origin.lon) * self.meters_per_deg_lon
        y = (p.lat - self.origin.lat) * self.meters_per_deg_lat
        return x, y

    def unproject(self, x: float, y: float) -> GeoPoint:
        """Inverse of :meth:`project`."""
        return GeoPoint(
            lat=self.origin.lat + y / self.meters_per_deg_lat,
            lon=self.origin.lon + x / self.meters_per_deg_lon,
        )

    def project_arrays(self, lons: np.ndarray, lats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = (lons - self.origin.lon) * self.meters_per_deg_lon
        ys = (lats - self.origin.lat) * self.meters_per_deg_lat
        return xs, ys

    def unproject_arrays(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lons = self.origin.lon + xs / self.meters_per_deg_lon
        lats = self.origin.lat + ys / self.meters_per_deg_lat
        return lons, lats


def project(frame: LocalFrame, p: GeoPoint) -> tuple[float, float]:
    return frame.project(p)


def unproject(frame: LocalFrame, x: float, y: float) -> GeoPoint:
    return frame.unproject(x, y)


def _segments_properly_cross(ax, ay, bx, by, cx, cy, dx, dy) -> bool:
    # Orientation-based proper / improper intersection test for segments
    # AB and CD that share no endpoint.
    def orient(px, py, qx, qy, rx, ry):
        v = (qx - px) * (ry - py) - (qy - py) * (rx - px)
        return (v > 0) - (v < 0)

    o1 = orient(ax, ay, bx, by, cx, cy)
    o2 = orient(ax, ay, bx, by, dx, dy)
    o3 = orient(cx, cy, dx, dy, ax, ay)
    o4 = orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return True

    def on_seg(px, py, qx, qy, rx, ry):
        return min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)

    if o1 == 0 and on_seg(ax, ay, bx, by, cx, cy):
        return True
    if o2 == 0 and on_seg(ax, ay, bx, by, dx, dy):
        return True
    if o3 == 0 and on_seg(cx, cy, dx, dy, ax, ay):
        return True
    if o4 == 0 and on_seg(cx, cy, dx, dy, bx, by):
        return True
    return False


class Polygon:
    """A simple (non-self-intersecting) polygon, implicitly closed.

    Vertices are validated at construction: at least three, no two
    consecutive vertices identical, no self-intersection, nonzero area.
    """

    __slots__ = ("vertices", "_lats", "_lons", "_bbox", "_area_deg2", "_centroid")

    def __init__(self, vertices: list[GeoPoint] | tuple[GeoPoint, ...]):
        verts = tuple(vertices)
        if len(verts) < 3:
            raise GeometryError(f"polygon needs at least 3 vertices, got {len(verts)}")
        n = len(verts)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            if a.lat == b.lat and a.lon == b.lon:
                raise GeometryError(f"consecutive duplicate vertices at index {i}")
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            for j in range(i + 1, n):
                # skip edges adjacent to edge i (they share a vertex)
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                c, d = verts[j], verts[(j + 1) % n]
                if _segments_properly_cross(
                    a.lon, a.lat, b.lon, b.lat, c.lon, c.lat, d.lon, d.lat
                ):
                    raise GeometryError(f"polygon self-intersects (edges {i} and {j})")

        area2 = 0.0  # twice the signed shoelace area, deg^2
        cx = cy = 0.0
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            cross = a.lon * b.lat - b.lon * a.lat
            area2 += cross
            cx += (a.lon + b.lon) * cross
            cy += (a.lat + b.lat) * cross
        if area2 == 0.0:
            raise GeometryError("degenerate polygon (zero area)")

        self.vertices = verts
        self._lats = np.array([v.lat for v in verts], dtype=np.float64)
        self._lons = np.array([v.lon for v in verts], dtype=np.float64)
        self._bbox = BoundingBox(
            min_lat=float(self._lats.min()),
            max_lat=float(self._lats.max()),
            min_lon=float(self._lons.min()),
            max_lon=float(self._lons.max()),
        )
        self._area_deg2 = abs(area2) / 2.0
        self._centroid = GeoPoint(lat=cy / (3.0 * area2), lon=cx / (3.0 * area2))

    def __repr__(self) -> str:
        return f"Polygon({len(self.vertices)} vertices, bbox={self._bbox})"

    @property
    def bbox(self) -> BoundingBox:
        return self._bbox

    @property
    def area_deg2(self) -> float:
        return self._area_deg2

    @property
    def centroid(self) -> GeoPoint:
        """Area centroid (shoelace); the anchoring point for local frames."""
        return self._centroid

    def local_frame(self) -> LocalFrame:
        return LocalFrame(origin=self.centroid)

    def contains_mask(self, lons: np.ndarray, lats: np.ndarray) -> np.ndarray:
        """Vectorized even-odd containment for candidate filtering.

        Boundary points may fall either way here; the scalar
        point_in_polygon (which pins boundary = inside) is the
        authoritative predicate.
        """
        n = len(self.vertices)
        inside = np.zeros(lons.shape, dtype=bool)
        for i in range(n):
            y1, x1 = self._lats[i], self._lons[i]
            y2, x2 = self._lats[(i + 1) % n], self._lons[(i + 1) % n]
            crossing = (y1 > lats) != (y2 > lats)
            denom = (y2 - y1) if y2 != y1 else 1.0
            xint = x1 + (lats - y1) * (x2 - x1) / denom
            inside ^= crossing & (lons < xint)
        return inside


def _on_segment(x: float, y: float, x1: float, y1: float, x2: float, y2: float) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def point_in_polygon(poly: Polygon, p: GeoPoint) -> bool:
    """Even-odd ray-casting containment in the lon/lat plane.

    Points exactly on an edge or vertex count as inside.
    """
    x, y = p.lon, p.lat
    verts = poly.vertices
    n = len(verts)
    inside = False
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        x1, y1, x2, y2 = a.lon, a.lat, b.lon, b.lat
        if _on_segment(x, y, x1, y1, x2, y2):
            return True
        if (y1 > y) != (y2 > y):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside


def polygon_bbox(poly: Polygon) -> BoundingBox:
    """Tight min/max bounding box over the polygon's vertices."""
    return poly.bbox


def load_boundary(path: str | Path) -> Polygon:
    """Parse a boundary file: one ``lat,lon`` pair per line, ``#`` comments."""
    path = Path(path)
    points: list[GeoPoint] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GeometryError(f"cannot read boundary file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise GeometryError(f"{path}:{lineno}: expected 'lat,lon', got {raw!r}")
        try:
            lat, lon = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise GeometryError(f"{path}:{lineno}: non-numeric coordinate in {raw!r}") from exc
        try:
            points.append(GeoPoint(lat=lat, lon=lon))
        except GeometryError as exc:
            raise GeometryError(f"{path}:{lineno}: {exc}") from exc
    try:
        return Polygon(points)
    except GeometryError as exc:
        raise GeometryError(f"{path}: {exc}") from exc
