"""Density-based validity index for a flat clustering with noise.

The index scores how well each cluster separates from the others relative
to its own internal density, without ground-truth labels:

* Every point gets an *all-points core distance*: the inverse of the
  generalized mean of inverse distances to the rest of its cluster,
  ``((sum_{s != o} (1/d(o,s))^dim) / (|C|-1)) ** (-1/dim)``, where ``dim``
  is the dimensionality of the space.  Dense surroundings give small core
  distances.
* The *mutual reachability* between two points is the maximum of their two
  core distances and their actual distance.
* A cluster's **density sparseness** is the largest edge weight used by
  the internal nodes (degree >= 2) of the cluster's mutual-reachability
  minimum spanning tree; a tree with no internal nodes (two-point
  clusters) falls back to all nodes and edges.
* The **density separation** between two clusters is the minimum mutual
  reachability between their internal nodes.
* A cluster's validity is ``(min_sep - sparseness) / max(min_sep,
  sparseness)`` in ``[-1, 1]``, and the index is the cluster-size-weighted
  mean of validities where the denominator counts *all* points, noise
  included — so noise drags the index toward zero.

Defined only for at least two clusters of at least two points each;
anything less raises :class:`UndefinedScoreError`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ContractError, UndefinedScoreError

__all__ = ["dbcv_index"]


def _all_points_core_distances(dist: np.ndarray, dim: int) -> np.ndarray:
    """Core distance of each point against the rest of its cluster.

    ``dist`` is the cluster's symmetric pairwise distance matrix.  Pairs at
    distance zero contribute an infinite inverse distance, which drives the
    core distance to zero — duplicated points are maximally dense.
    """
    n = dist.shape[0]
    with np.errstate(divide="ignore"):
        inv = np.where(dist > 0.0, 1.0 / dist, np.inf)
    np.fill_diagonal(inv, 0.0)
    mean_pow = np.power(inv, dim).sum(axis=1) / (n - 1)
    with np.errstate(divide="ignore"):
        out = np.power(mean_pow, -1.0 / dim)
    out[np.isinf(mean_pow)] = 0.0
    return out


def _mst_edges(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of a complete graph (Prim, deterministic ties)."""
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = weights[0].copy()
    parent = np.zeros(n, dtype=int)
    in_tree[0] = True
    best[0] = np.inf
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        candidate = np.where(in_tree, np.inf, best)
        j = int(np.argmin(candidate))
        edges.append((int(parent[j]), j, float(best[j])))
        in_tree[j] = True
        best[j] = np.inf
        improved = (weights[j] < best) & ~in_tree
        best[improved] = weights[j][improved]
        parent[improved] = j
    return edges


def _sparseness_and_internal(
    points: np.ndarray, core: np.ndarray
) -> tuple[float, np.ndarray]:
    """Density sparseness of one cluster plus its internal node indices."""
    dist = cdist(points, points)
    reach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    edges = _mst_edges(reach)
    degree = np.zeros(len(points), dtype=int)
    for a, b, _ in edges:
        degree[a] += 1
        degree[b] += 1
    internal = np.flatnonzero(degree >= 2)
    if internal.size:
        internal_set = set(internal.tolist())
        internal_edges = [w for a, b, w in edges if a in internal_set and b in internal_set]
    else:
        internal_edges = []
    if not internal_edges:
        # Degenerate tree (for example a two-point cluster): fall back to
        # considering every node internal and every edge eligible.
        internal = np.arange(len(points))
        internal_edges = [w for _, _, w in edges]
    return max(internal_edges), internal


def _separation(
    points_a: np.ndarray,
    core_a: np.ndarray,
    internal_a: np.ndarray,
    points_b: np.ndarray,
    core_b: np.ndarray,
    internal_b: np.ndarray,
) -> float:
    """Minimum mutual reachability between two clusters' internal nodes."""
    cross = cdist(points_a[internal_a], points_b[internal_b])
    reach = np.maximum(cross, np.maximum(core_a[internal_a][:, None], core_b[internal_b][None, :]))
    return float(reach.min())


def _validity(separation: float, sparseness: float) -> float:
    if math.isinf(separation) and math.isinf(sparseness):
        return 0.0
    if math.isinf(separation):
        return 1.0
    if math.isinf(sparseness):
        return -1.0
    denominator = max(separation, sparseness)
    if denominator == 0.0:
        return 0.0
    return (separation - sparseness) / denominator


def dbcv_index(points: np.ndarray, labels: np.ndarray) -> float:
    """Score a flat clustering of ``points`` in ``[-1, 1]``.

    ``labels`` assigns each point a cluster id (non-negative) or noise
    (``-1``).  Noise points carry zero weight but still count in the
    total, so heavy noise pulls the index toward zero.  Raises
    :class:`UndefinedScoreError` unless there are at least two clusters
    with at least two points each.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ContractError("points must be a non-empty 2-D array")
    if labels.shape != (points.shape[0],):
        raise ContractError(
            f"labels shape {labels.shape} does not match {points.shape[0]} points"
        )
    if not np.all(np.isfinite(points)):
        raise ContractError("points contain non-finite values")

    cluster_ids = sorted(int(c) for c in np.unique(labels) if c >= 0)
    members = {c: np.flatnonzero(labels == c) for c in cluster_ids}
    small = [c for c in cluster_ids if members[c].size < 2]
    if len(cluster_ids) < 2 or small:
        raise UndefinedScoreError(
            "density validity is undefined: need >= 2 clusters of >= 2 points, "
            f"got {len(cluster_ids)} cluster(s)"
            + (f" with undersized {small}" if small else "")
        )

    dim = points.shape[1]
    total = points.shape[0]

    cluster_points: dict[int, np.ndarray] = {}
    cores: dict[int, np.ndarray] = {}
    sparseness: dict[int, float] = {}
    internal: dict[int, np.ndarray] = {}
    for c in cluster_ids:
        cluster_points[c] = points[members[c]]
        dist = cdist(cluster_points[c], cluster_points[c])
        cores[c] = _all_points_core_distances(dist, dim)
        sparseness[c], internal[c] = _sparseness_and_internal(cluster_points[c], cores[c])

    score = 0.0
    for c in cluster_ids:
        min_sep = math.inf
        for other in cluster_ids:
            if other == c:
                continue
            sep = _separation(
                cluster_points[c], cores[c], internal[c],
                cluster_points[other], cores[other], internal[other],
            )
            min_sep = min(min_sep, sep)
        score += (members[c].size / total) * _validity(min_sep, sparseness[c])
    return float(min(1.0, max(-1.0, score)))
