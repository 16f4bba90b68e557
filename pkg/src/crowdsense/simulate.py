"""Deterministic synthetic crowd scenarios.

People are placed uniformly inside the campus polygon (rejection
sampling from the bounding box), optionally random-walk between report
rounds, and can be pulled into Gaussian hotspots that provide ground
truth for cluster-recovery tests. Every draw comes from a single
Philox counter-based generator seeded solely from the scenario seed,
so a scenario's output is a pure function of its config; the process
default RNG is never touched.

Emitted coordinates are quantized to 1e-7 degrees (the dataset wire
precision) and containment is checked on the quantized values, so
every written coordinate is inside the campus polygon and a write/read
round-trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geo import GeoPoint, LocalFrame, Polygon, point_in_polygon
from .model import Dataset, Report, parse_iso_utc

DEFAULT_POPULATION = 9000
DEFAULT_TICK_S = 60.0
DEFAULT_WALK_SIGMA_M = 2.0
DEFAULT_EPOCH = "2024-05-01T12:00:00.000Z"

_HOTSPOT_MAX_TRIES = 1000
_WALK_MAX_TRIES = 100


class ScenarioError(ValueError):
    """Raised for unusable scenario configurations."""


@dataclass(frozen=True, slots=True)
class Hotspot:
    """Isotropic Gaussian concentration active during [start_s, end_s]."""

    center: GeoPoint
    sigma_m: float
    count: int
    start_s: float = 0.0
    end_s: float = float("inf")

    def __post_init__(self) -> None:
        if self.sigma_m <= 0:
            raise ScenarioError(f"hotspot sigma must be positive, got {self.sigma_m}")
        if self.count < 0:
            raise ScenarioError(f"hotspot count must be >= 0, got {self.count}")
        if self.start_s > self.end_s:
            raise ScenarioError("hotspot start_s must be <= end_s")

    def active_at(self, t_s: float) -> bool:
        return self.start_s <= t_s <= self.end_s


@dataclass(frozen=True)
class ScenarioConfig:
    campus: Polygon
    seed: int = 0
    population: int = DEFAULT_POPULATION
    duration_s: float = 0.0
    tick_s: float = DEFAULT_TICK_S
    walk_sigma_m: float = DEFAULT_WALK_SIGMA_M
    epoch_ms: int = field(default_factory=lambda: parse_iso_utc(DEFAULT_EPOCH))
    hotspots: tuple[Hotspot, ...] = ()

    def __post_init__(self) -> None:
        if self.population < 0:
            raise ScenarioError(f"population must be >= 0, got {self.population}")
        if self.duration_s < 0:
            raise ScenarioError(f"duration must be >= 0, got {self.duration_s}")
        if self.tick_s <= 0:
            raise ScenarioError(f"tick must be positive, got {self.tick_s}")
        if self.walk_sigma_m < 0:
            raise ScenarioError(f"walk sigma must be >= 0, got {self.walk_sigma_m}")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must fit in 64 unsigned bits")
        total_hot = sum(h.count for h in self.hotspots)
        if total_hot > self.population:
            raise ScenarioError(
                f"hotspot members ({total_hot}) exceed population ({self.population})"
            )
        for i, h in enumerate(self.hotspots):
            if not point_in_polygon(self.campus, h.center):
                raise ScenarioError(f"hotspot {i} center is outside the campus polygon")


def make_rng(seed: int) -> np.random.Generator:
    """The scenario RNG: Philox (counter-based), keyed by the seed alone."""
    return np.random.Generator(np.random.Philox(key=seed))


def _quantize(arr: np.ndarray) -> np.ndarray:
    return np.round(arr, 7)


def _uniform_arrays(
    n: int, poly: Polygon, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n wire-precision points uniform in the polygon, by bbox rejection."""
    bbox = poly.bbox
    got_lon: list[np.ndarray] = []
    got_lat: list[np.ndarray] = []
    remaining = n
    while remaining > 0:
        batch = max(64, remaining + remaining // 2 + 16)
        lons = _quantize(rng.uniform(bbox.min_lon, bbox.max_lon, batch))
        lats = _quantize(rng.uniform(bbox.min_lat, bbox.max_lat, batch))
        keep = poly.contains_mask(lons, lats)
        lons, lats = lons[keep][:remaining], lats[keep][:remaining]
        got_lon.append(lons)
        got_lat.append(lats)
        remaining -= len(lons)
    if not got_lon:
        return np.empty(0), np.empty(0)
    return np.concatenate(got_lon), np.concatenate(got_lat)


def generate_uniform_in_polygon(
    n: int, poly: Polygon, rng: np.random.Generator
) -> list[GeoPoint]:
    if n < 0:
        raise ScenarioError(f"n must be >= 0, got {n}")
    lons, lats = _uniform_arrays(n, poly, rng)
    return [GeoPoint(lat=la, lon=lo) for lo, la in zip(lons.tolist(), lats.tolist())]


def _hotspot_arrays(
    h: Hotspot, campus: Polygon, frame: LocalFrame, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    cx, cy = frame.project(h.center)
    out_lon = np.empty(h.count)
    out_lat = np.empty(h.count)
    pending = np.arange(h.count)
    tries = 0
    while len(pending):
        tries += 1
        if tries > _HOTSPOT_MAX_TRIES:
            raise ScenarioError(
                f"hotspot at ({h.center.lat}, {h.center.lon}) rejected "
                f"{_HOTSPOT_MAX_TRIES} consecutive draws; is it effectively outside campus?"
            )
        disp = rng.standard_normal((len(pending), 2)) * h.sigma_m
        lons, lats = frame.unproject_arrays(cx + disp[:, 0], cy + disp[:, 1])
        lons, lats = _quantize(lons), _quantize(lats)
        ok = campus.contains_mask(lons, lats)
        slots = pending[ok]
        out_lon[slots] = lons[ok]
        out_lat[slots] = lats[ok]
        pending = pending[~ok]
    return out_lon, out_lat


def sample_hotspot(
    h: Hotspot, campus: Polygon, frame: LocalFrame, rng: np.random.Generator
) -> list[GeoPoint]:
    """h.count Gaussian samples around the hotspot center, redrawn while
    they fall outside the campus polygon."""
    lons, lats = _hotspot_arrays(h, campus, frame, rng)
    return [GeoPoint(lat=la, lon=lo) for lo, la in zip(lons.tolist(), lats.tolist())]


def _walk_arrays(
    lons: np.ndarray,
    lats: np.ndarray,
    sigma_m: float,
    poly: Polygon,
    frame: LocalFrame,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One random-walk step per point; a step that exits the polygon is
    redrawn up to 100 times, then the point stays put."""
    if sigma_m == 0.0 or len(lons) == 0:
        return lons, lats
    xs, ys = frame.project_arrays(lons, lats)
    new_lon = lons.copy()
    new_lat = lats.copy()
    pending = np.arange(len(lons))
    for _ in range(_WALK_MAX_TRIES):
        disp = rng.standard_normal((len(pending), 2)) * sigma_m
        cand_lon, cand_lat = frame.unproject_arrays(
            xs[pending] + disp[:, 0], ys[pending] + disp[:, 1]
        )
        cand_lon, cand_lat = _quantize(cand_lon), _quantize(cand_lat)
        ok = poly.contains_mask(cand_lon, cand_lat)
        slots = pending[ok]
        new_lon[slots] = cand_lon[ok]
        new_lat[slots] = cand_lat[ok]
        pending = pending[~ok]
        if not len(pending):
            break
    return new_lon, new_lat


def step_random_walk(
    p: GeoPoint,
    sigma_m: float,
    poly: Polygon,
    frame: LocalFrame,
    rng: np.random.Generator,
) -> GeoPoint:
    lons, lats = _walk_arrays(
        np.array([p.lon]), np.array([p.lat]), sigma_m, poly, frame, rng
    )
    return GeoPoint(lat=float(lats[0]), lon=float(lons[0]))


def person_id(index: int) -> str:
    return f"p{index:06d}"


def scenario_ticks(cfg: ScenarioConfig) -> list[float]:
    """Report-round offsets in seconds: 0, tick, 2*tick, ... <= duration."""
    ticks = []
    k = 0
    while k * cfg.tick_s <= cfg.duration_s:
        ticks.append(k * cfg.tick_s)
        k += 1
    return ticks


def run_scenario(cfg: ScenarioConfig) -> Dataset:
    """Run a scenario; the result is fully determined by the config.

    Draw order per tick is pinned: initial uniform placement for the
    whole population, then per tick a walk step for everyone (when
    moving), then hotspot re-anchoring in hotspot list order. Hotspot
    members are the highest-indexed people, assigned in list order.
    """
    rng = make_rng(cfg.seed)
    frame = cfg.campus.local_frame()
    ids = [person_id(i) for i in range(cfg.population)]

    lons, lats = _uniform_arrays(cfg.population, cfg.campus, rng)

    total_hot = sum(h.count for h in cfg.hotspots)
    slot_base = cfg.population - total_hot
    hot_slices: list[slice] = []
    for h in cfg.hotspots:
        hot_slices.append(slice(slot_base, slot_base + h.count))
        slot_base += h.count

    reports: Dataset = []
    for k, t in enumerate(scenario_ticks(cfg)):
        if k > 0:
            lons, lats = _walk_arrays(
                lons, lats, cfg.walk_sigma_m, cfg.campus, frame, rng
            )
        for h, sl in zip(cfg.hotspots, hot_slices):
            if h.count and h.active_at(t):
                h_lon, h_lat = _hotspot_arrays(h, cfg.campus, frame, rng)
                lons[sl] = h_lon
                lats[sl] = h_lat
        ts_ms = cfg.epoch_ms + round(t * 1000)
        lons_l, lats_l = lons.tolist(), lats.tolist()
        for i in range(cfg.population):
            reports.append(Report(id=ids[i], lat=lats_l[i], lon=lons_l[i], ts_ms=ts_ms))
    return reports


# --- scenario config files ----------------------------------------------

_SCALAR_KEYS = {
    "seed": int,
    "population": int,
    "duration_s": float,
    "tick_s": float,
    "walk_sigma_m": float,
    "epoch": str,
    "campus": str,
}
_HOTSPOT_KEYS = {
    "lat": float,
    "lon": float,
    "sigma_m": float,
    "count": int,
    "start_s": float,
    "end_s": float,
}


@dataclass
class ScenarioFileValues:
    """Raw values parsed from a scenario config file; campus is a path
    resolved relative to the file."""

    values: dict[str, object]
    hotspots: list[dict[str, object]]


def parse_scenario_file(path: str | Path) -> ScenarioFileValues:
    """Parse the flat key/value grammar with repeated ``hotspot { ... }`` blocks."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc

    values: dict[str, object] = {}
    hotspots: list[dict[str, object]] = []
    block: dict[str, object] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "hotspot {":
            if block is not None:
                raise ScenarioError(f"{path}:{lineno}: nested hotspot block")
            block = {}
            continue
        if line == "}":
            if block is None:
                raise ScenarioError(f"{path}:{lineno}: unmatched '}}'")
            hotspots.append(block)
            block = None
            continue
        if "=" not in line:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        schema = _HOTSPOT_KEYS if block is not None else _SCALAR_KEYS
        if key not in schema:
            where = "hotspot block" if block is not None else "scenario"
            raise ScenarioError(f"{path}:{lineno}: unknown {where} key {key!r}")
        try:
            parsed: object = schema[key](value)
        except ValueError as exc:
            raise ScenarioError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
        if block is not None:
            block[key] = parsed
        else:
            if key == "campus":
                parsed = str((path.parent / str(parsed)).resolve())
            values[key] = parsed
    if block is not None:
        raise ScenarioError(f"{path}: unterminated hotspot block")
    return ScenarioFileValues(values=values, hotspots=hotspots)
