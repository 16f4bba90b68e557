"""Brute-force DBSCAN used as the correctness oracle for the grid kernels.

Neighborhoods come from a full O(n^2) distance comparison (computed in
row blocks to bound memory) with no spatial index, so any indexing bug
in the production kernels shows up as a label-vector mismatch.
"""

from __future__ import annotations

import math

import numpy as np

from ..geo import EARTH_RADIUS_M
from ._grid import METRIC_DEGREES, METRIC_HAVERSINE

_BLOCK_ROWS = 512


def _neighbor_lists(
    lons: np.ndarray, lats: np.ndarray, eps: float, metric: str
) -> list[np.ndarray]:
    n = len(lons)
    neighbors: list[np.ndarray] = []
    if metric == METRIC_DEGREES:
        eps2 = eps * eps
        for start in range(0, n, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, n)
            dx = lons[None, :] - lons[start:stop, None]
            dy = lats[None, :] - lats[start:stop, None]
            mask = dx * dx + dy * dy <= eps2
            for r in range(stop - start):
                neighbors.append(np.nonzero(mask[r])[0])
    elif metric == METRIC_HAVERSINE:
        phi = np.radians(lats)
        lam = np.radians(lons)
        cos_phi = np.cos(phi)
        half = min(eps / (2.0 * EARTH_RADIUS_M), math.pi / 2.0)
        thresh = math.sin(half) ** 2
        for start in range(0, n, _BLOCK_ROWS):
            stop = min(start + _BLOCK_ROWS, n)
            sdphi = np.sin((phi[None, :] - phi[start:stop, None]) * 0.5)
            sdlam = np.sin((lam[None, :] - lam[start:stop, None]) * 0.5)
            h = sdphi * sdphi + cos_phi[start:stop, None] * cos_phi[None, :] * sdlam * sdlam
            mask = h <= thresh
            for r in range(stop - start):
                neighbors.append(np.nonzero(mask[r])[0])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return neighbors


def dbscan_labels_reference(
    lons: np.ndarray,
    lats: np.ndarray,
    eps: float,
    min_samples: int,
    metric: str,
) -> np.ndarray:
    n = len(lons)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    neighbors = _neighbor_lists(lons, lats, eps, metric)
    labels = [-2] * n  # -2 undefined, -1 noise
    cid = -1
    for i in range(n):
        if labels[i] != -2:
            continue
        if len(neighbors[i]) < min_samples:
            labels[i] = -1
            continue
        cid += 1
        labels[i] = cid
        queue: list[int] = []
        for j in neighbors[i].tolist():
            if j == i:
                continue
            if labels[j] == -1:
                labels[j] = cid
            elif labels[j] == -2:
                labels[j] = cid
                queue.append(j)
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            if len(neighbors[j]) < min_samples:
                continue
            for k in neighbors[j].tolist():
                if labels[k] == -1:
                    labels[k] = cid
                elif labels[k] == -2:
                    labels[k] = cid
                    queue.append(k)
    return np.array(labels, dtype=np.int64)
