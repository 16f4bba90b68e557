#!/usr/bin/env python3
"""Benchmark the DBSCAN label kernels: compiled extension vs pure-Python
fallback vs the brute-force reference, on the default campus-scale
scenario (9,000 background people + three 200-person hotspots).

Usage: python benchmarks/kernel_benchmark.py [--repeats N] [--sizes 1000,9600]
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from crowdsense.clustering import (
    METRIC_DEGREES,
    METRIC_HAVERSINE,
    USING_COMPILED_KERNEL,
    DbscanParams,
)
from crowdsense.clustering._grid import METRIC_CODES, cell_sizes
from crowdsense.clustering._kernel_py import dbscan_labels as labels_pure
from crowdsense.clustering._reference import dbscan_labels_reference as labels_reference
from crowdsense.data import load_default_campus
from crowdsense.simulate import Hotspot, ScenarioConfig, run_scenario
from crowdsense.geo import GeoPoint

try:
    from crowdsense.clustering._kernel import dbscan_labels as labels_compiled
except ImportError:
    labels_compiled = None


def scenario_arrays(n_total: int, seed: int = 0):
    campus = load_default_campus()
    n_hot = min(200, n_total // 10)
    hotspots = tuple(
        Hotspot(center=c, sigma_m=20.0, count=n_hot)
        for c in (GeoPoint(-15.8650, -70.0450), GeoPoint(-15.8650, -69.9950),
                  GeoPoint(-15.8000, -70.0400))
    )
    cfg = ScenarioConfig(campus=campus, seed=seed, population=n_total,
                         duration_s=0.0, hotspots=hotspots)
    ds = run_scenario(cfg)
    lons = np.array([r.lon for r in ds])
    lats = np.array([r.lat for r in ds])
    return lons, lats


def bench(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sizes", default="1000,4000,9600",
                        help="comma-separated point counts")
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"compiled kernel available: {USING_COMPILED_KERNEL}")
    print(f"{'n':>7} {'metric':>9} {'reference':>11} {'pure':>11} "
          f"{'compiled':>11} {'pure x':>8} {'compiled x':>10}")

    for n in sizes:
        lons, lats = scenario_arrays(n)
        for metric in (METRIC_DEGREES, METRIC_HAVERSINE):
            eps = 0.0007 if metric == METRIC_DEGREES else 75.0
            params = DbscanParams(eps=eps, min_samples=4, metric=metric)
            cw, ch = cell_sizes(metric, params.eps, lats)

            t_ref = bench(
                lambda: labels_reference(lons, lats, params.eps, 4, metric),
                args.repeats,
            )
            t_pure = bench(
                lambda: labels_pure(lons, lats, params.eps, 4, metric),
                args.repeats,
            )
            if labels_compiled is not None:
                t_comp = bench(
                    lambda: labels_compiled(lons, lats, params.eps, 4,
                                            METRIC_CODES[metric], cw, ch),
                    args.repeats,
                )
                comp_txt = f"{t_comp * 1000:9.1f}ms"
                comp_x = f"{t_ref / t_comp:9.1f}x"
            else:
                comp_txt, comp_x = f"{'n/a':>11}", f"{'n/a':>10}"

            # all paths must agree before any timing is worth reporting
            a = labels_reference(lons, lats, params.eps, 4, metric)
            b = labels_pure(lons, lats, params.eps, 4, metric)
            assert np.array_equal(a, b), "pure kernel diverged from reference"
            if labels_compiled is not None:
                c = labels_compiled(lons, lats, params.eps, 4,
                                    METRIC_CODES[metric], cw, ch)
                assert np.array_equal(a, c), "compiled kernel diverged from reference"

            print(f"{n:>7} {metric:>9} {t_ref * 1000:9.1f}ms "
                  f"{t_pure * 1000:9.1f}ms {comp_txt} "
                  f"{t_ref / t_pure:7.1f}x {comp_x}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
