"""Geodesic distances between stations, coordinate K-means, and elbow-based
selection of the cluster count.

K-means runs on raw (lat, lon) pairs under Euclidean geometry, which is
adequate for cluster shape at continental extents; the haversine matrix is
kept for reporting inter-station distances in kilometers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class KMeansResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    inertia_history: tuple

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        l = np.asarray(self.labels, dtype=np.int64)
        c.setflags(write=False)
        l.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "labels", l)
        object.__setattr__(self, "inertia_history", tuple(self.inertia_history))


def geodesic_distance(a, b):
    """Haversine great-circle distance in kilometers between (lat, lon) pairs."""
    lat1, lon1 = np.radians(a[0]), np.radians(a[1])
    lat2, lon2 = np.radians(b[0]), np.radians(b[1])
    s = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return float(2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0))))


def geodesic_distance_matrix(points):
    """Symmetric n x n haversine distance matrix for (lat, lon) rows."""
    pts = np.asarray(points, dtype=np.float64)
    lat = np.radians(pts[:, 0])[:, None]
    lon = np.radians(pts[:, 1])[:, None]
    s = (np.sin((lat.T - lat) / 2) ** 2
         + np.cos(lat) * np.cos(lat.T) * np.sin((lon.T - lon) / 2) ** 2)
    d = 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d


def _plus_plus_init(pts, k, rng):
    n = pts.shape[0]
    centroids = np.empty((k, pts.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = pts[first]
    d2 = ((pts - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[j] = pts[int(rng.integers(n))]
            continue
        pick = int(rng.choice(n, p=d2 / total))
        centroids[j] = pts[pick]
        d2 = np.minimum(d2, ((pts - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(points, k, seed=0, max_iters=300):
    """Lloyd's algorithm with k-means++ seeding; fully seeded, deterministic.

    Empty clusters are repaired by reassigning the point farthest from its
    current centroid. The recorded inertia history is non-increasing.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds number of points {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(pts, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    history = []
    for _ in range(max_iters):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), new_labels]
        for j in range(k):                      # repair empty clusters
            if not np.any(new_labels == j):
                far = int(np.argmax(point_d2))
                new_labels[far] = j
                point_d2[far] = 0.0
        inertia = float(point_d2.sum())
        history.append(inertia)
        converged = np.array_equal(new_labels, labels) and len(history) > 1
        labels = new_labels
        for j in range(k):
            centroids[j] = pts[labels == j].mean(axis=0)
        if converged:
            break
    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)
    return KMeansResult(k, centroids, labels, inertia, tuple(history))


def best_of_restarts(points, k, seed=0, restarts=10, max_iters=300):
    """Best of ``restarts`` seeded runs; ties pick the earliest restart."""
    child_seeds = np.random.SeedSequence(seed).generate_state(restarts)
    best = None
    for r in range(restarts):
        res = kmeans(points, k, seed=int(child_seeds[r]), max_iters=max_iters)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def elbow_select(points, k_range, seed=0, restarts=10, max_iters=300):
    """Choose k maximizing the discrete second difference of the inertia curve.

    Returns (selected k, inertia curve as list of (k, inertia)). The curve
    covers the whole contiguous k_range; the selection considers interior
    points only.
    """
    ks = list(k_range)
    if len(ks) < 3:
        raise ValueError("k_range must contain at least 3 values")
    if ks[0] < 1 or any(b - a != 1 for a, b in zip(ks, ks[1:])):
        raise ValueError("k_range must be contiguous with min >= 1")
    inertias = [best_of_restarts(points, k, seed=seed, restarts=restarts,
                                 max_iters=max_iters).inertia for k in ks]
    curve = list(zip(ks, inertias))
    second_diff = [inertias[j - 1] - 2 * inertias[j] + inertias[j + 1]
                   for j in range(1, len(ks) - 1)]
    selected = ks[1 + int(np.argmax(second_diff))]
    return selected, curve
