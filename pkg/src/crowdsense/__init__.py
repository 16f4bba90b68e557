"""crowdsense: campus crowd detection from device location reports.

Simulate location datasets over a campus boundary, cluster them with
DBSCAN, render density grids, raise crowding alerts, and ingest live
report streams over the wire.
"""

from .geo import BoundingBox, GeoPoint, LocalFrame, Polygon, haversine_distance
from .model import Dataset, Frame, Report, read_dataset, window_frames, write_dataset
from .clustering import ClusterSummary, DbscanParams, dbscan, summarize_clusters
from .density import DensityGrid, build_density_grid, gaussian_smooth
from .alerts import Alert, AlertState, AlertThresholds, evaluate_frame
from .simulate import Hotspot, ScenarioConfig, run_scenario

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "GeoPoint", "Polygon", "BoundingBox", "LocalFrame", "haversine_distance",
    "Report", "Frame", "Dataset", "read_dataset", "write_dataset", "window_frames",
    "DbscanParams", "ClusterSummary", "dbscan", "summarize_clusters",
    "DensityGrid", "build_density_grid", "gaussian_smooth",
    "AlertThresholds", "Alert", "AlertState", "evaluate_frame",
    "ScenarioConfig", "Hotspot", "run_scenario",
]
