"""Execution layout for a sample: balanced clusters, ordered internally.

Rows are mapped to quantile space, assigned to Sobol centroids by a
balanced transportation LP, and each cluster is ordered by a greedy
nearest-neighbour walk starting from the row closest to the input-space
median point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ot import solve_balanced_assignment, sqeuclidean_cost
from .sampling import SampleMatrix, sobol_points

__all__ = ["SampleMatrix", "ExperimentLayout", "cluster_balanced", "order_cluster", "layout_cost"]

LAYOUT_SCHEMA = "dacgsa.layout/1"


@dataclass
class ExperimentLayout:
    """Equal-size clusters of row indices, each in execution order."""

    clusters: list
    centroids: np.ndarray

    def __post_init__(self):
        self.clusters = [[int(i) for i in c] for c in self.clusters]
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        sizes = {len(c) for c in self.clusters}
        if len(sizes) > 1:
            raise ValueError(f"clusters have unequal sizes {sorted(sizes)}")
        flat = [i for c in self.clusters for i in c]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("clusters do not partition the row indices")

    @property
    def n_runs(self) -> int:
        return sum(len(c) for c in self.clusters)

    def cluster_of(self) -> np.ndarray:
        """Cluster id of every row."""
        out = np.empty(self.n_runs, dtype=int)
        for k, c in enumerate(self.clusters):
            out[c] = k
        return out

    def position_in_cluster(self) -> np.ndarray:
        out = np.empty(self.n_runs, dtype=int)
        for c in self.clusters:
            out[c] = np.arange(len(c))
        return out

    def to_dict(self) -> dict:
        return {
            "schema": LAYOUT_SCHEMA,
            "n_runs": self.n_runs,
            "clusters": [{"cluster_id": k, "run_ids": c} for k, c in enumerate(self.clusters)],
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentLayout":
        clusters = [c["run_ids"] for c in sorted(d["clusters"], key=lambda c: c["cluster_id"])]
        return cls(clusters, np.asarray(d["centroids"]))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "ExperimentLayout":
        return cls.from_dict(json.loads(Path(path).read_text()))


def order_cluster(cluster_rows, anchor) -> list:
    """Greedy nearest-neighbour tour through ``cluster_rows``.

    Starts at the row closest to ``anchor``; every next row is the unvisited
    one closest to the current row (squared Euclidean).  Ties go to the
    lowest row position.

    Returns
    -------
    list of int
        Positions into ``cluster_rows`` in visiting order.
    """
    X = np.atleast_2d(np.asarray(cluster_rows, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cannot order an empty cluster")
    D = sqeuclidean_cost(X, X)
    d0 = sqeuclidean_cost(np.atleast_2d(anchor), X)[0]
    visited = np.zeros(len(X), dtype=bool)
    cur = int(np.argmin(d0))
    order = [cur]
    visited[cur] = True
    for _ in range(len(X) - 1):
        d = np.where(visited, np.inf, D[cur])
        cur = int(np.argmin(d))
        order.append(cur)
        visited[cur] = True
    return order


def _clustering_space(samples: SampleMatrix) -> np.ndarray:
    return samples.quantiles[:, ~samples.degenerate]


def cluster_balanced(samples: SampleMatrix, n_clusters: int, seed: int | None = None) -> ExperimentLayout:
    """Partition rows into ``n_clusters`` equal clusters around Sobol centroids.

    Clustering happens in quantile space over the non-degenerate columns.
    With ``seed=None`` the centroids are the plain Sobol points; an integer
    seed switches to an Owen-scrambled sequence with that seed.
    """
    N = samples.n
    if n_clusters < 1 or N % n_clusters:
        raise ValueError(f"N={N} rows cannot be split into {n_clusters} equal clusters")
    Q = _clustering_space(samples)
    p = Q.shape[1]
    if seed is None:
        centroids = sobol_points(n_clusters, p)
    else:
        centroids = _scrambled(p, n_clusters, seed)
    labels, _ = solve_balanced_assignment(Q, centroids, N // n_clusters)
    anchor = np.full(p, 0.5)
    clusters = []
    for k in range(n_clusters):
        members = np.flatnonzero(labels == k)
        clusters.append(members[order_cluster(Q[members], anchor)].tolist())
    return ExperimentLayout(clusters, centroids)


def _scrambled(p, n, seed):
    import warnings

    from scipy.stats import qmc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return qmc.Sobol(d=p, scramble=True, seed=seed).random(n)


def layout_cost(samples: SampleMatrix, layout: ExperimentLayout) -> float:
    """Total squared distance from each row to its cluster centroid."""
    Q = _clustering_space(samples)
    lab = layout.cluster_of()
    return float(((Q - layout.centroids[lab]) ** 2).sum())
