"""Pure-Python DBSCAN label kernel (fallback when the compiled one is absent).

Semantics pinned across all kernels: a point is core iff its closed
eps-ball (including itself) holds at least min_samples points; points
are processed in input order; a border point joins the first cluster
that reaches it; cluster ids count up from 0 in discovery order.
"""

from __future__ import annotations

import numpy as np

from ._grid import GridIndex

UNDEFINED = -2
NOISE = -1


def dbscan_labels(
    lons: np.ndarray,
    lats: np.ndarray,
    eps: float,
    min_samples: int,
    metric: str,
) -> np.ndarray:
    n = len(lons)
    labels = [UNDEFINED] * n
    if n == 0:
        return np.empty(0, dtype=np.int64)
    index = GridIndex(lons, lats, eps, metric)
    cid = -1
    for i in range(n):
        if labels[i] != UNDEFINED:
            continue
        neigh = index.query(float(lons[i]), float(lats[i]))
        if len(neigh) < min_samples:
            labels[i] = NOISE
            continue
        cid += 1
        labels[i] = cid
        queue: list[int] = []
        for j in neigh.tolist():
            if j == i:
                continue
            if labels[j] == NOISE:
                labels[j] = cid
            elif labels[j] == UNDEFINED:
                labels[j] = cid
                queue.append(j)
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            neigh_j = index.query(float(lons[j]), float(lats[j]))
            if len(neigh_j) < min_samples:
                continue
            for k in neigh_j.tolist():
                if labels[k] == NOISE:
                    labels[k] = cid
                elif labels[k] == UNDEFINED:
                    labels[k] = cid
                    queue.append(k)
    return np.array(labels, dtype=np.int64)
