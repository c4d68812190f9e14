import numpy as np
import pytest

from frugalnn import cluster, data, synthetic


@pytest.fixture(scope="session")
def blob_split():
    """Small normalized blobs fixture shared by environment/agent tests."""
    ds, _ = synthetic.blobs_with_noise(n_per_cluster=20, seed=3)
    return data.split(ds, data.SplitSpec(seed=1))


@pytest.fixture(scope="session")
def blob_clustering(blob_split):
    train, _ = blob_split
    return cluster.kmeans(train.rows, 5, seed=0)


@pytest.fixture(scope="session")
def blob_schedule(blob_split):
    train, _ = blob_split
    return data.uniform_schedule(train.n_features)


def random_clustering(rng: np.random.Generator, n_features: int,
                      n_clusters: int, n_rows: int = 12) -> cluster.Clustering:
    """Arbitrary valid clustering for property tests (no k-means run)."""
    centroids = rng.uniform(size=(n_clusters, n_features))
    assignment = rng.integers(n_clusters, size=n_rows)
    return cluster.Clustering(centroids=centroids, assignment=assignment, seed=0)
