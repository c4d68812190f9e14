"""K-means clustering, partial-feature cluster ranking, and the rank-MSE score.

The quality of a revealed feature set F' is judged by how well ranking the
cluster centroids by distance over F' alone agrees with the ranking obtained
from all features: the score is the mean squared difference of the two rank
vectors, 0 when they agree exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from frugalnn.data import Dataset

KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class Clustering:
    """Fitted centroids plus the nearest-centroid assignment of the fit rows."""

    centroids: np.ndarray
    assignment: np.ndarray
    seed: int = 0

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        a = np.ascontiguousarray(self.assignment, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


def _rows_of(train) -> np.ndarray:
    return train.rows if isinstance(train, Dataset) else np.asarray(train, dtype=float)


def _nearest(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # squared distances; argmin ties resolve to the lowest centroid index
    d2 = ((rows[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _plusplus_seed(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centroids = np.empty((k, rows.shape[1]))
    centroids[0] = rows[rng.integers(n)]
    d2 = ((rows - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = rows[rng.integers(n)]
        else:
            centroids[i] = rows[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((rows - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _repair_empty(rows, centroids, assignment) -> bool:
    """Re-seed each empty cluster with the point farthest from its centroid."""
    repaired = False
    counts = np.bincount(assignment, minlength=centroids.shape[0])
    for j in np.flatnonzero(counts == 0):
        dist = np.linalg.norm(rows - centroids[assignment], axis=1)
        i = int(dist.argmax())
        centroids[j] = rows[i]
        assignment[i] = j
        repaired = True
    return repaired


def kmeans(train, k: int, seed: int = 0) -> Clustering:
    """Lloyd's iterations with k-means++ seeding, run to assignment fixpoint.

    Deterministic per seed; empty clusters are repaired by re-seeding them
    with the farthest point from its current centroid.
    """
    rows = _rows_of(train)
    n = rows.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available rows")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_seed(rows, k, rng)
    assignment = _nearest(rows, centroids)
    _repair_empty(rows, centroids, assignment)
    for _ in range(KMEANS_MAX_ITER):
        for j in range(k):
            centroids[j] = rows[assignment == j].mean(axis=0)
        new_assignment = _nearest(rows, centroids)
        if _repair_empty(rows, centroids, new_assignment):
            new_assignment = _nearest(rows, centroids)
            _repair_empty(rows, centroids, new_assignment)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    if np.bincount(assignment, minlength=k).min() == 0:
        raise ValueError("could not maintain k non-empty clusters "
                         "(too many duplicate rows for this k)")
    return Clustering(centroids=centroids, assignment=assignment, seed=seed)


def partial_distance(p, q, revealed) -> float:
    """L2 distance restricted to the revealed coordinates (0 when empty)."""
    idx = _revealed_index(revealed)
    if idx.size == 0:
        return 0.0
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    diff = p[idx] - q[idx]
    return float(np.sqrt(diff @ diff))


def partial_distances(p, rows: np.ndarray, revealed) -> np.ndarray:
    """Vector of partial distances from `p` to every row."""
    idx = _revealed_index(revealed)
    if idx.size == 0:
        return np.zeros(rows.shape[0])
    p = np.asarray(p, dtype=float)
    diff = rows[:, idx] - p[idx]
    return np.sqrt((diff * diff).sum(axis=1))


def _revealed_index(revealed) -> np.ndarray:
    if isinstance(revealed, np.ndarray):
        return revealed.astype(int)
    return np.fromiter(sorted(revealed), dtype=int, count=len(revealed))


def rank_clusters(p, revealed, clustering: Clustering) -> np.ndarray:
    """1-based rank per cluster by ascending partial distance to the centroid.

    Ties break toward the lower cluster index, so the result is always a
    permutation of 1..K.
    """
    d = partial_distances(p, clustering.centroids, revealed)
    order = np.argsort(d, kind="stable")
    ranks = np.empty(clustering.n_clusters, dtype=int)
    ranks[order] = np.arange(1, clustering.n_clusters + 1)
    return ranks


def score(revealed, p, clustering: Clustering) -> float:
    """Mean squared error between partial-feature and full-feature rankings."""
    n = clustering.centroids.shape[1]
    full = rank_clusters(p, np.arange(n), clustering)
    partial = rank_clusters(p, revealed, clustering)
    diff = (partial - full).astype(float)
    return float(diff @ diff) / clustering.n_clusters


def clustering_to_dict(cl: Clustering) -> dict:
    return {"version": 1, "k": cl.n_clusters, "seed": cl.seed,
            "centroids": cl.centroids.tolist()}


def save_clustering(cl: Clustering, path: str, extra: dict | None = None) -> None:
    doc = clustering_to_dict(cl)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_clustering(path: str, rows: np.ndarray) -> Clustering:
    """Rebuild a Clustering from file; assignment is recomputed from `rows`."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    centroids = np.asarray(doc["centroids"], dtype=float)
    return Clustering(centroids=centroids,
                      assignment=_nearest(np.asarray(rows, dtype=float), centroids),
                      seed=int(doc.get("seed", 0)))


def clustering_hash(cl: Clustering) -> str:
    blob = json.dumps(clustering_to_dict(cl), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
