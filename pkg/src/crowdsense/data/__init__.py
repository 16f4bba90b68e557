"""Bundled fixtures: the default campus boundary and a demo scenario."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..geo import Polygon, load_boundary


def default_campus_path() -> Path:
    return Path(str(resources.files(__name__) / "campus_default.txt"))


def demo_scenario_path() -> Path:
    return Path(str(resources.files(__name__) / "scenario_demo.cfg"))


def load_default_campus() -> Polygon:
    return load_boundary(default_campus_path())
