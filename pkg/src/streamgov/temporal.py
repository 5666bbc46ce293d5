"""Amplitude-normalized trajectory comparison, affinity matrices and
agglomerative clustering.

Trajectories are L1-normalized flow series; the distance between two
trajectories is the L1 distance, mapped to an affinity A = 1 - D/max(D).
The clustering is deterministic agglomerative linkage on 1 - A.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import pairwise_l1
from .ingest import DataError

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True)
class TrajectoryCollection:
    """(n, T) matrix of non-negative rows, each summing to 1."""
    trajectories: np.ndarray
    station_ids: tuple

    def __post_init__(self):
        m = np.asarray(self.trajectories, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "trajectories", m)
        object.__setattr__(self, "station_ids", tuple(self.station_ids))
        if np.any(m < 0):
            raise ValueError("trajectories must be non-negative")
        if not np.allclose(m.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("each trajectory must sum to 1")


@dataclass(frozen=True)
class AffinityMatrix:
    values: np.ndarray
    norm: float
    domain_tag: str
    station_ids: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "station_ids", tuple(self.station_ids))
        if self.domain_tag not in ("temporal", "spectral"):
            raise ValueError(f"unknown domain tag {self.domain_tag!r}")

    @property
    def n(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history.

    ``merges`` holds n-1 rows (cluster_a, cluster_b, height, size) using the
    convention that leaves are clusters 0..n-1 and the merge at step s
    creates cluster n+s. ``leaf_order`` is the recursive left-before-right
    leaf permutation.
    """
    merges: tuple
    leaf_order: tuple
    n: int


def normalize_l1(collection):
    """Divide each station's flow by its total so rows sum to 1."""
    m = collection.matrix()
    totals = m.sum(axis=1)
    bad = np.flatnonzero(totals <= 0)
    if bad.size:
        sid = collection.stations[bad[0]].meta.station_id
        raise DataError(f"{sid}: zero total flow, cannot normalize")
    return TrajectoryCollection(m / totals[:, None], tuple(collection.station_ids))


def temporal_distance(trajectories):
    """n x n matrix of L1 distances between normalized trajectories."""
    return pairwise_l1(trajectories.trajectories)


def to_affinity(distances, domain_tag="temporal", station_ids=None):
    """Map a distance matrix to affinities A = 1 - D/max(D).

    The affinity norm is the mean of the strictly-upper-triangle entries.
    """
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if np.any(d < 0):
        raise ValueError("distance matrix must be non-negative")
    if np.any(np.diag(d) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if not np.allclose(d, d.T, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    dmax = d.max()
    if dmax == 0:
        raise ValueError("all-zero distance matrix")
    a = 1.0 - d / dmax
    a = (a + a.T) / 2.0
    norm = float(a[np.triu_indices(n, k=1)].mean())
    if station_ids is None:
        station_ids = tuple(str(i) for i in range(n))
    return AffinityMatrix(a, norm, domain_tag, tuple(station_ids))


def _linkage_update(kind, d_ak, d_bk, size_a, size_b):
    if kind == "average":
        return (size_a * d_ak + size_b * d_bk) / (size_a + size_b)
    if kind == "single":
        return np.minimum(d_ak, d_bk)
    return np.maximum(d_ak, d_bk)


def hierarchical_cluster(affinity, linkage="average"):
    """Agglomerative clustering on dissimilarity 1 - A.

    Deterministic: merge ties are broken by the lexicographically smallest
    (cluster_a, cluster_b) id pair.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}")
    n = affinity.n
    d = 1.0 - np.array(affinity.values, dtype=np.float64)
    np.fill_diagonal(d, np.inf)

    ids = list(range(n))           # cluster id per active slot
    sizes = [1] * n
    children = {}                  # cluster id -> (a, b)
    merges = []
    for step in range(n - 1):
        k = len(ids)
        iu = np.triu_indices(k, 1)
        vals = d[iu]
        best = vals.min()
        # break ties by smallest (id_a, id_b)
        cand = np.flatnonzero(vals == best)
        pairs = sorted(
            (tuple(sorted((ids[iu[0][c]], ids[iu[1][c]]))), c) for c in cand
        )
        (ca, cb), c = pairs[0]
        i, j = int(iu[0][c]), int(iu[1][c])
        new_id = n + step
        new_size = sizes[i] + sizes[j]
        merges.append((ca, cb, float(best), new_size))
        children[new_id] = (ca, cb)

        keep = [s for s in range(k) if s not in (i, j)]
        d_new = _linkage_update(linkage, d[i, keep], d[j, keep],
                                sizes[i], sizes[j])
        d = d[np.ix_(keep, keep)]
        d = np.pad(d, ((0, 1), (0, 1)), constant_values=np.inf)
        d[-1, :-1] = d_new
        d[:-1, -1] = d_new
        ids = [ids[s] for s in keep] + [new_id]
        sizes = [sizes[s] for s in keep] + [new_size]

    def leaves(cid):
        if cid < n:
            return [cid]
        a, b = children[cid]
        return leaves(a) + leaves(b)

    leaf_order = tuple(leaves(2 * n - 2)) if n > 1 else (0,)
    return Dendrogram(tuple(merges), leaf_order, n)


def cut_dendrogram(dendrogram, k):
    """Labels for k clusters, obtained by undoing the k-1 highest merges.

    Labels are 0..k-1, ordered by each cluster's smallest station index.
    """
    n = dendrogram.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range 1..{n}")
    parent = list(range(2 * n - 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for step in range(n - k):
        a, b, _, _ = dendrogram.merges[step]
        new_id = n + step
        parent[find(a)] = new_id
        parent[find(b)] = new_id

    roots = {}
    raw = [find(i) for i in range(n)]
    for i, r in enumerate(raw):
        roots.setdefault(r, i)      # smallest member index per root
    ordered = sorted(roots, key=roots.get)
    relabel = {r: lab for lab, r in enumerate(ordered)}
    return np.array([relabel[r] for r in raw], dtype=np.int64)
