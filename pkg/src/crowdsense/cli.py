"""Command-line interface.

One executable, seven subcommands: simulate, cluster, heatmap, alerts,
serve, replay, and pipeline (simulate + cluster + heatmap + alerts in
one run). Exit codes: 0 success, 1 runtime/data error, 2 usage error.

Every batch subcommand is deterministic given its flags and inputs;
only serve/replay interact with the wall clock. Defaults marked
"policy default" in the help are judgement calls meant to be tuned per
deployment, not measured constants.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

from . import __version__
from .alerts import AlertState, AlertThresholds, evaluate_frame, format_alert_line
from .clustering import (
    DEFAULT_EPS_DEGREES,
    DEFAULT_EPS_METERS,
    DEFAULT_MIN_SAMPLES,
    METRIC_DEGREES,
    METRIC_HAVERSINE,
    DbscanParams,
    dbscan,
    format_summary_line,
    summarize_clusters,
)
from .data import default_campus_path
from .density import build_density_grid, export_grid, gaussian_smooth, write_grid_meta
from .geo import GeometryError, GeoPoint, Polygon, load_boundary
from .ingest import CrowdServer, IngestConfig
from .model import (
    Dataset,
    DatasetError,
    format_iso_ms,
    format_report_line,
    parse_iso_utc,
    read_dataset,
    read_dataset_lenient,
    window_frames,
    write_dataset,
)
from .replay import replay_dataset
from .simulate import (
    DEFAULT_EPOCH,
    DEFAULT_POPULATION,
    DEFAULT_TICK_S,
    DEFAULT_WALK_SIGMA_M,
    Hotspot,
    ScenarioConfig,
    ScenarioError,
    parse_scenario_file,
    run_scenario,
)

DEFAULT_CELL_M = 10.0
DEFAULT_WINDOW_S = 60.0


class UsageError(Exception):
    """Command-line misuse detected after argparse (exit code 2)."""


# --- argparse value types -----------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _ratio(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _epoch(text: str) -> int:
    try:
        return parse_iso_utc(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _hotspot(text: str) -> Hotspot:
    parts = text.split(",")
    if len(parts) not in (4, 6):
        raise argparse.ArgumentTypeError(
            "hotspot must be lat,lon,sigma_m,count[,start_s,end_s]"
        )
    try:
        lat, lon, sigma = float(parts[0]), float(parts[1]), float(parts[2])
        count = int(parts[3])
        start_s = float(parts[4]) if len(parts) == 6 else 0.0
        end_s = float(parts[5]) if len(parts) == 6 else float("inf")
        return Hotspot(center=GeoPoint(lat=lat, lon=lon), sigma_m=sigma,
                       count=count, start_s=start_s, end_s=end_s)
    except (ValueError, ScenarioError, GeometryError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None


# --- shared flag groups --------------------------------------------------

def _add_campus_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--campus", type=Path, default=None, metavar="FILE",
        help="campus boundary file (lat,lon lines); default: bundled fixture",
    )


def _add_cluster_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--eps", type=_positive_float, default=None,
        help=f"clustering radius: degrees metric defaults to {DEFAULT_EPS_DEGREES} "
             f"(standard campus-scale operating point), haversine to {DEFAULT_EPS_METERS} m",
    )
    p.add_argument(
        "--min-samples", type=_positive_int, default=DEFAULT_MIN_SAMPLES,
        help=f"points required in the closed eps-ball for a core point "
             f"(default {DEFAULT_MIN_SAMPLES})",
    )
    p.add_argument(
        "--metric", choices=[METRIC_DEGREES, METRIC_HAVERSINE], default=METRIC_DEGREES,
        help="degrees: euclidean in raw lon/lat, eps in degrees; "
             "haversine: great-circle, eps in meters (default: degrees)",
    )


def _add_window_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--window", type=_positive_float, default=DEFAULT_WINDOW_S, metavar="SECONDS",
        help=f"frame window length (policy default {DEFAULT_WINDOW_S:g} s)",
    )
    p.add_argument(
        "--step", type=_positive_float, default=None, metavar="SECONDS",
        help="frame step; default: same as --window (non-overlapping frames)",
    )


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--cell", type=_positive_float, default=DEFAULT_CELL_M, metavar="METERS",
        help=f"density grid cell edge (policy default {DEFAULT_CELL_M:g} m)",
    )
    p.add_argument(
        "--sigma", type=_nonneg_float, default=0.0, metavar="CELLS",
        help="Gaussian smoothing radius in cells; 0 disables (default 0)",
    )


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-cluster-count", type=_positive_int, default=50,
                   help="cluster alert entry population (policy default 50)")
    p.add_argument("--max-radius", type=_positive_float, default=30.0, metavar="METERS",
                   help="cluster alert max radius (policy default 30 m)")
    p.add_argument("--cell-density-crit", type=_positive_int, default=25,
                   help="cell alert entry count (policy default 25)")
    p.add_argument("--exit-ratio", type=_ratio, default=0.8,
                   help="hysteresis release fraction of the entry threshold "
                        "(policy default 0.8)")


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, metavar="FILE",
                   help="scenario config file (key = value, hotspot { ... } blocks)")
    p.add_argument("--seed", type=_seed, default=None,
                   help="scenario seed (default 0); the output is a pure function of it")
    p.add_argument("--population", type=_nonneg_int, default=None,
                   help=f"people simulated (default {DEFAULT_POPULATION})")
    p.add_argument("--duration", type=_nonneg_float, default=None, metavar="SECONDS",
                   help="scenario length; 0 = a single snapshot (default 0)")
    p.add_argument("--tick", type=_positive_float, default=None, metavar="SECONDS",
                   help=f"seconds between report rounds (policy default {DEFAULT_TICK_S:g})")
    p.add_argument("--walk-sigma", type=_nonneg_float, default=None, metavar="METERS",
                   help=f"random-walk step sigma per tick "
                        f"(policy default {DEFAULT_WALK_SIGMA_M:g} m)")
    p.add_argument("--epoch", type=_epoch, default=None, metavar="ISO8601",
                   help=f"timestamp of tick 0 (default {DEFAULT_EPOCH})")
    p.add_argument("--hotspot", type=_hotspot, action="append", default=None,
                   metavar="LAT,LON,SIGMA,COUNT[,START,END]",
                   help="inject a Gaussian hotspot; repeatable; overrides config hotspots")


# --- helpers -------------------------------------------------------------

def _load_campus(path: Path | None) -> Polygon:
    return load_boundary(path if path is not None else default_campus_path())


def _resolve_eps(args: argparse.Namespace) -> float:
    if args.eps is not None:
        return args.eps
    return DEFAULT_EPS_DEGREES if args.metric == METRIC_DEGREES else DEFAULT_EPS_METERS


def _dbscan_params(args: argparse.Namespace) -> DbscanParams:
    return DbscanParams(eps=_resolve_eps(args), min_samples=args.min_samples,
                        metric=args.metric)


def _thresholds(args: argparse.Namespace) -> AlertThresholds:
    return AlertThresholds(
        min_cluster_count=args.min_cluster_count,
        max_radius_m=args.max_radius,
        cell_density_crit=args.cell_density_crit,
        exit_ratio=args.exit_ratio,
    )


def _build_scenario(args: argparse.Namespace) -> ScenarioConfig:
    values: dict[str, object] = {}
    hotspots: list[Hotspot] = []
    campus_path: Path | None = args.campus
    if args.config is not None:
        parsed = parse_scenario_file(args.config)
        values = dict(parsed.values)
        for block in parsed.hotspots:
            missing = {"lat", "lon", "sigma_m", "count"} - set(block)
            if missing:
                raise ScenarioError(
                    f"{args.config}: hotspot block missing {sorted(missing)}"
                )
            hotspots.append(
                Hotspot(
                    center=GeoPoint(lat=float(block["lat"]), lon=float(block["lon"])),
                    sigma_m=float(block["sigma_m"]),
                    count=int(block["count"]),
                    start_s=float(block.get("start_s", 0.0)),
                    end_s=float(block.get("end_s", float("inf"))),
                )
            )
        if campus_path is None and "campus" in values:
            campus_path = Path(str(values["campus"]))
    if args.hotspot is not None:
        hotspots = list(args.hotspot)

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return values.get(key, default)

    campus = _load_campus(campus_path)
    epoch_ms = args.epoch
    if epoch_ms is None:
        epoch_ms = (
            parse_iso_utc(str(values["epoch"])) if "epoch" in values
            else parse_iso_utc(DEFAULT_EPOCH)
        )
    return ScenarioConfig(
        campus=campus,
        seed=int(pick(args.seed, "seed", 0)),
        population=int(pick(args.population, "population", DEFAULT_POPULATION)),
        duration_s=float(pick(args.duration, "duration_s", 0.0)),
        tick_s=float(pick(args.tick, "tick_s", DEFAULT_TICK_S)),
        walk_sigma_m=float(pick(args.walk_sigma, "walk_sigma_m", DEFAULT_WALK_SIGMA_M)),
        epoch_ms=epoch_ms,
        hotspots=tuple(hotspots),
    )


def _read_sorted(path: Path, skip_bad_lines: bool) -> tuple[Dataset, int]:
    if skip_bad_lines:
        ds, skipped = read_dataset_lenient(path)
    else:
        ds, skipped = read_dataset(path), 0
    ds.sort(key=lambda r: r.ts_ms)  # stable: preserves file order within a ts
    return ds, skipped


def _cluster_frames(ds: Dataset, args: argparse.Namespace):
    """Yield (frame, labels, summaries) per window."""
    params = _dbscan_params(args)
    campus = _load_campus(args.campus)
    local = campus.local_frame()
    for frame in window_frames(ds, args.window, args.step):
        points = frame.geopoints()
        labels = dbscan(points, params)
        yield frame, labels, summarize_clusters(points, labels, local)


# --- subcommands ----------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _build_scenario(args)
    ds = run_scenario(cfg)
    if args.out == Path("-"):
        for r in ds:
            sys.stdout.write(format_report_line(r) + "\n")
        count = len(ds)
    else:
        count = write_dataset(ds, args.out, format=args.format)
    print(f"wrote {count} reports (seed={cfg.seed})", file=sys.stderr)
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    if args.labels is not None and args.step is not None and args.step != args.window:
        raise UsageError("--labels requires non-overlapping frames (--step == --window)")
    ds, skipped = _read_sorted(args.input, args.skip_bad_lines)
    if skipped:
        print(f"skipped {skipped} bad lines", file=sys.stderr)

    out = sys.stdout if args.out == Path("-") else open(args.out, "w", encoding="utf-8")
    label_by_frame: list[dict[str, int]] = []
    frame_starts: list[int] = []
    try:
        for frame, labels, summaries in _cluster_frames(ds, args):
            for s in summaries:
                out.write(format_summary_line(frame.start_ms, s) + "\n")
            if args.labels is not None:
                label_by_frame.append(
                    {rid: int(lbl) for (rid, _), lbl in zip(frame.points, labels)}
                )
                frame_starts.append(frame.start_ms)
    finally:
        if out is not sys.stdout:
            out.close()

    if args.labels is not None:
        window_ms = round(args.window * 1000)
        with open(args.labels, "w", encoding="utf-8") as fh:
            fh.write("id,longitude,latitude,timestamp,label\n")
            for r in ds:
                idx = (r.ts_ms - frame_starts[0]) // window_ms if frame_starts else 0
                label = label_by_frame[idx].get(r.id, -1) if frame_starts else -1
                fh.write(
                    f"{r.id},{r.lon:.7f},{r.lat:.7f},{format_iso_ms(r.ts_ms)},{label}\n"
                )
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    ds, skipped = _read_sorted(args.input, args.skip_bad_lines)
    if skipped:
        print(f"skipped {skipped} bad lines", file=sys.stderr)
    campus = _load_campus(args.campus)
    local = campus.local_frame()
    grid = build_density_grid([r.point for r in ds], campus.bbox, args.cell, local)
    prefix = args.out
    export_grid(grid, f"{prefix}.csv", format="csv")
    render = grid
    if args.sigma > 0:
        render = gaussian_smooth(grid, args.sigma)
        export_grid(render, f"{prefix}_smoothed.csv", format="csv")
    export_grid(render, f"{prefix}.pgm", format="pgm")
    write_grid_meta(
        grid, f"{prefix}_meta.txt",
        first_ts=format_iso_ms(ds[0].ts_ms) if ds else None,
        last_ts=format_iso_ms(ds[-1].ts_ms) if ds else None,
        sigma_cells=args.sigma,
    )
    print(
        f"grid {grid.rows}x{grid.cols} total={int(grid.total)} dropped={grid.dropped}",
        file=sys.stderr,
    )
    return 0


def cmd_alerts(args: argparse.Namespace) -> int:
    ds, skipped = _read_sorted(args.input, args.skip_bad_lines)
    if skipped:
        print(f"skipped {skipped} bad lines", file=sys.stderr)
    campus = _load_campus(args.campus)
    local = campus.local_frame()
    thresholds = _thresholds(args)
    state = AlertState()
    events_written = 0
    out = sys.stdout if args.out == Path("-") else open(args.out, "w", encoding="utf-8")
    try:
        for frame, labels, summaries in _cluster_frames(ds, args):
            grid = build_density_grid(frame.geopoints(), campus.bbox, args.cell, local)
            events, state = evaluate_frame(
                frame.start_ms, summaries, grid, thresholds, state, local
            )
            for event in events:
                out.write(format_alert_line(event) + "\n")
                events_written += 1
    finally:
        if out is not sys.stdout:
            out.close()
    print(f"wrote {events_written} alert events", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    campus = _load_campus(args.campus)
    salt = None
    if args.salt_file is not None:
        salt = Path(args.salt_file).read_bytes().rstrip(b"\r\n")
        if not salt:
            raise UsageError(f"salt file {args.salt_file} is empty")
    config = IngestConfig(
        campus=campus,
        listen_host=args.listen[0],
        listen_port=args.listen[1],
        snapshot_host=args.snapshot_listen[0],
        snapshot_port=args.snapshot_listen[1],
        window_s=args.window,
        salt=salt,
        reject_outside=args.reject_outside,
        dbscan_params=_dbscan_params(args),
        cell_size_m=args.cell,
        thresholds=_thresholds(args),
    )

    async def _run() -> None:
        async with CrowdServer(config) as server:
            host, port = server.ingest_address
            shost, sport = server.snapshot_address
            print(f"ingest listening on {host}:{port}", file=sys.stderr)
            print(f"snapshots on {shost}:{sport}", file=sys.stderr)
            await asyncio.Event().wait()  # until interrupted

    try:
        asyncio.run(_run())
    except KeyboardInterrupt:
        print("shutting down", file=sys.stderr)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    ds, skipped = _read_sorted(args.input, args.skip_bad_lines)
    if skipped:
        print(f"skipped {skipped} bad lines", file=sys.stderr)
    host, port = args.target
    try:
        stats = asyncio.run(
            replay_dataset(ds, host, port, speed=args.speed,
                           connections=args.connections)
        )
    except (ConnectionError, OSError) as exc:
        print(f"error: cannot reach {host}:{port}: {exc}", file=sys.stderr)
        return 1
    print(
        f"sent={stats.sent} ok={stats.ok} err={stats.err} "
        f"elapsed={stats.elapsed_s:.3f}s accepted_rate={stats.accepted_per_s:.0f}/s"
    )
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _build_scenario(args)
    ds = run_scenario(cfg)
    n = write_dataset(ds, out_dir / "dataset.ndjson", format="ndjson")
    print(f"dataset.ndjson: {n} reports (seed={cfg.seed})", file=sys.stderr)

    campus = cfg.campus
    local = campus.local_frame()
    params = _dbscan_params(args)
    thresholds = _thresholds(args)
    state = AlertState()
    n_summaries = n_events = 0
    with open(out_dir / "clusters.ndjson", "w", encoding="utf-8") as cl_out, \
            open(out_dir / "alerts.ndjson", "w", encoding="utf-8") as al_out:
        for frame in window_frames(ds, args.window, args.step):
            points = frame.geopoints()
            labels = dbscan(points, params)
            summaries = summarize_clusters(points, labels, local)
            for s in summaries:
                cl_out.write(format_summary_line(frame.start_ms, s) + "\n")
                n_summaries += 1
            frame_grid = build_density_grid(points, campus.bbox, args.cell, local)
            events, state = evaluate_frame(
                frame.start_ms, summaries, frame_grid, thresholds, state, local
            )
            for event in events:
                al_out.write(format_alert_line(event) + "\n")
                n_events += 1
    print(f"clusters.ndjson: {n_summaries} summaries", file=sys.stderr)
    print(f"alerts.ndjson: {n_events} events", file=sys.stderr)

    grid = build_density_grid([r.point for r in ds], campus.bbox, args.cell, local)
    export_grid(grid, out_dir / "grid.csv", format="csv")
    render = grid
    if args.sigma > 0:
        render = gaussian_smooth(grid, args.sigma)
        export_grid(render, out_dir / "grid_smoothed.csv", format="csv")
    export_grid(render, out_dir / "grid.pgm", format="pgm")
    write_grid_meta(
        grid, out_dir / "grid_meta.txt",
        first_ts=format_iso_ms(ds[0].ts_ms) if ds else None,
        last_ts=format_iso_ms(ds[-1].ts_ms) if ds else None,
        sigma_cells=args.sigma,
    )
    print(f"grid.csv/grid.pgm: {grid.rows}x{grid.cols}", file=sys.stderr)
    return 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdsense",
        description="Campus crowd detection: simulate, cluster, map, alert, serve.",
        epilog="exit codes: 0 success, 1 runtime/data error, 2 usage error",
    )
    parser.add_argument("--version", action="version", version=f"crowdsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="generate a synthetic location dataset")
    _add_scenario_flags(p)
    _add_campus_flag(p)
    p.add_argument("--format", choices=["ndjson", "csv"], default="ndjson")
    p.add_argument("-o", "--out", type=Path, default=Path("-"),
                   help="output file (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cluster", help="window a dataset and cluster each frame")
    p.add_argument("input", type=Path, help="dataset file (ndjson or csv)")
    _add_cluster_flags(p)
    _add_window_flags(p)
    _add_campus_flag(p)
    p.add_argument("--labels", type=Path, default=None, metavar="FILE",
                   help="also write per-point labels as CSV (needs --step == --window)")
    p.add_argument("--skip-bad-lines", action="store_true",
                   help="skip malformed records instead of failing")
    p.add_argument("-o", "--out", type=Path, default=Path("-"),
                   help="summaries NDJSON (default: stdout)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("heatmap", help="bin a dataset into a density grid")
    p.add_argument("input", type=Path)
    _add_campus_flag(p)
    _add_grid_flags(p)
    p.add_argument("--skip-bad-lines", action="store_true")
    p.add_argument("-o", "--out", required=True, metavar="PREFIX",
                   help="output prefix; writes PREFIX.csv, PREFIX.pgm, PREFIX_meta.txt")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("alerts", help="evaluate crowding alerts over a dataset")
    p.add_argument("input", type=Path)
    _add_cluster_flags(p)
    _add_window_flags(p)
    _add_grid_flags(p)
    _add_threshold_flags(p)
    _add_campus_flag(p)
    p.add_argument("--skip-bad-lines", action="store_true")
    p.add_argument("-o", "--out", type=Path, default=Path("-"),
                   help="alert log NDJSON (default: stdout)")
    p.set_defaults(func=cmd_alerts)

    p = sub.add_parser("serve", help="run the ingest + snapshot server")
    p.add_argument("--listen", type=_address, default=("127.0.0.1", 7700),
                   metavar="HOST:PORT", help="report listener (default 127.0.0.1:7700)")
    p.add_argument("--snapshot-listen", type=_address, default=("127.0.0.1", 7701),
                   metavar="HOST:PORT", help="snapshot listener (default 127.0.0.1:7701)")
    p.add_argument("--window", type=_positive_float, default=DEFAULT_WINDOW_S,
                   metavar="SECONDS", help="receive-clock frame window (default 60)")
    p.add_argument("--salt-file", type=Path, default=None,
                   help="anonymization salt bytes; default: random per run "
                        "(tokens then differ across restarts)")
    p.add_argument("--reject-outside", action="store_true",
                   help="reject reports outside the campus polygon")
    _add_campus_flag(p)
    _add_cluster_flags(p)
    p.add_argument("--cell", type=_positive_float, default=DEFAULT_CELL_M,
                   metavar="METERS", help=f"grid cell edge (default {DEFAULT_CELL_M:g})")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="stream a dataset to a running server")
    p.add_argument("input", type=Path)
    p.add_argument("--target", type=_address, default=("127.0.0.1", 7700),
                   metavar="HOST:PORT", help="ingest listener (default 127.0.0.1:7700)")
    p.add_argument("--speed", type=_nonneg_float, default=1.0,
                   help="time scale; 0 streams flat out with no sleeps (default 1)")
    p.add_argument("--connections", type=_positive_int, default=1,
                   help="concurrent client connections (default 1)")
    p.add_argument("--skip-bad-lines", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("pipeline",
                       help="simulate, cluster, grid, and alert in one run")
    _add_scenario_flags(p)
    _add_campus_flag(p)
    _add_cluster_flags(p)
    _add_window_flags(p)
    _add_grid_flags(p)
    _add_threshold_flags(p)
    p.add_argument("-o", "--out-dir", type=Path, required=True,
                   help="directory for dataset/clusters/grid/alert files")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, GeometryError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
