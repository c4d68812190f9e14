"""Seeded synthetic tables with known cluster structure.

The standard fixture puts Gaussian blobs in the first `n_informative`
coordinates (centers kept pairwise-separated by rejection sampling) and fills
the remaining coordinates with uniform noise, so which features matter is
known by construction.  Everything is driven by one Generator per call.
"""

from __future__ import annotations

import numpy as np

from frugalnn.data import Dataset


def separated_centers(n_clusters: int, n_dims: int, min_sep: float,
                      rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
    """Uniform draws from the unit cube, rejecting any center closer than
    min_sep to an accepted one."""
    centers: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(centers) == n_clusters:
            break
        c = rng.uniform(0.0, 1.0, size=n_dims)
        if all(np.linalg.norm(c - prev) >= min_sep for prev in centers):
            centers.append(c)
    if len(centers) < n_clusters:
        raise ValueError(f"could not place {n_clusters} centers with "
                         f"min_sep={min_sep} in {n_dims}-d unit cube")
    return np.vstack(centers)


def latin_centers(n_clusters: int, n_dims: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Centers on a per-dimension permuted grid, so every dimension spreads
    the clusters over n_clusters distinct evenly spaced values."""
    grid = np.linspace(0.05, 0.95, n_clusters)
    cols = [grid[rng.permutation(n_clusters)] for _ in range(n_dims)]
    return np.column_stack(cols)


def blobs_with_noise(n_per_cluster: int = 40, n_clusters: int = 5,
                     n_informative: int = 4, n_noise: int = 4,
                     cluster_std: float = 0.05, min_sep: float = 0.45,
                     centers: str = "random",
                     seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Gaussian blobs in the informative dims, uniform junk in the rest.

    `centers` picks the placement scheme: "random" rejection-samples the unit
    cube at min_sep, "latin" spreads the clusters across a permuted grid in
    every informative dimension.  Returns (raw dataset, true label per row);
    rows are shuffled so labels are not ordered.
    """
    rng = np.random.default_rng(seed)
    if centers == "latin":
        center_array = latin_centers(n_clusters, n_informative, rng)
    elif centers == "random":
        center_array = separated_centers(n_clusters, n_informative, min_sep, rng)
    else:
        raise ValueError(f"unknown center scheme {centers!r}")
    parts, labels = [], []
    for k in range(n_clusters):
        pts = center_array[k] + rng.normal(0.0, cluster_std,
                                           size=(n_per_cluster, n_informative))
        parts.append(pts)
        labels.append(np.full(n_per_cluster, k))
    informative = np.vstack(parts)
    labels = np.concatenate(labels)
    noise = rng.uniform(0.0, 1.0, size=(informative.shape[0], n_noise))
    rows = np.hstack([informative, noise])
    order = rng.permutation(rows.shape[0])
    names = [f"f{j}" for j in range(n_informative + n_noise)]
    return Dataset(feature_names=names, rows=rows[order]), labels[order]


def oracle_pair(n_per_cluster: int = 30, gap: float = 0.8,
                cluster_std: float = 0.03, seed: int = 0) -> tuple[Dataset, np.ndarray]:
    """Two features where feature 0 alone determines cluster membership.

    Two blobs sit at f0 ~ 0 and f0 ~ gap; feature 1 is uniform noise for both,
    so an efficient policy pays for f0 and nothing else.
    """
    rng = np.random.default_rng(seed)
    f0 = np.concatenate([
        rng.normal(0.0, cluster_std, size=n_per_cluster),
        rng.normal(gap, cluster_std, size=n_per_cluster),
    ])
    f1 = rng.uniform(0.0, 1.0, size=2 * n_per_cluster)
    labels = np.repeat([0, 1], n_per_cluster)
    order = rng.permutation(f0.shape[0])
    rows = np.column_stack([f0, f1])[order]
    return Dataset(feature_names=["f0", "f1"], rows=rows), labels[order]
