"""Clustering-quality and coverage metrics.

Davies-Bouldin (lower is better), silhouette (in [-1, 1], higher is better),
and Calinski-Harabasz (higher is better) follow their textbook definitions
with two pinned conventions: empty clusters never contribute, and a singleton
cluster's silhouette is 0. Coverage is the largest fraction of one
ground-truth label captured by any single predicted cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np


class MetricError(ValueError):
    """Metric undefined for this clustering (too few clusters, coincident centroids...)."""


@dataclass(frozen=True)
class ClusteringView:
    """Points plus a flat assignment vector; the substrate all metrics share."""

    points: np.ndarray  # (n, D)
    assignments: np.ndarray  # (n,) int
    k: int

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        assignments = np.asarray(self.assignments, dtype=np.int64)
        if points.ndim != 2 or assignments.shape != (points.shape[0],):
            raise ValueError("points must be (n, D) with one assignment per point")
        if assignments.size and (assignments.min() < 0 or assignments.max() >= self.k):
            raise ValueError("assignment index outside [0, k)")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "assignments", assignments)


def _nonempty_clusters(view: ClusteringView) -> list[np.ndarray]:
    """Member matrices of the non-empty clusters, in cluster-index order."""
    out = []
    for j in range(view.k):
        members = view.points[view.assignments == j]
        if members.shape[0] > 0:
            out.append(members)
    return out


def davies_bouldin(view: ClusteringView) -> float:
    clusters = _nonempty_clusters(view)
    if len(clusters) < 2:
        raise MetricError("Davies-Bouldin needs at least 2 non-empty clusters")
    centroids = np.stack([c.mean(axis=0) for c in clusters])
    scatter = np.array(
        [np.mean(np.sqrt(np.sum((c - centroids[i]) ** 2, axis=1))) for i, c in enumerate(clusters)]
    )
    total = 0.0
    for i in range(len(clusters)):
        worst = -math.inf
        for j in range(len(clusters)):
            if j == i:
                continue
            sep = float(np.sqrt(np.sum((centroids[i] - centroids[j]) ** 2)))
            if sep == 0.0:
                raise MetricError("Davies-Bouldin undefined: coincident cluster centroids")
            worst = max(worst, (scatter[i] + scatter[j]) / sep)
        total += worst
    return total / len(clusters)


def silhouette(view: ClusteringView) -> float:
    labels = view.assignments
    points = view.points
    n = points.shape[0]
    present = [j for j in range(view.k) if np.any(labels == j)]
    if len(present) < 2:
        raise MetricError("silhouette needs at least 2 non-empty clusters")
    if n < 2:
        raise MetricError("silhouette needs at least 2 points")
    sizes = {j: int(np.sum(labels == j)) for j in present}
    # full pairwise distance matrix; fine for the report-sized views this serves
    d = np.sqrt(np.maximum(_pairwise_sq(points), 0.0))
    scores = np.zeros(n)
    for i in range(n):
        own = labels[i]
        if sizes[own] == 1:
            continue  # singleton convention: s(i) = 0
        a = float(d[i][labels == own].sum()) / (sizes[own] - 1)
        b = math.inf
        for j in present:
            if j == own:
                continue
            b = min(b, float(d[i][labels == j].mean()))
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def _pairwise_sq(points: np.ndarray) -> np.ndarray:
    sq = np.sum(points**2, axis=1)
    return sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)


def calinski_harabasz(view: ClusteringView) -> float:
    clusters = _nonempty_clusters(view)
    kk = len(clusters)
    n = view.points.shape[0]
    if kk < 2:
        raise MetricError("Calinski-Harabasz needs at least 2 non-empty clusters")
    if n <= kk:
        raise MetricError("Calinski-Harabasz needs more points than clusters")
    overall = view.points.mean(axis=0)
    between = sum(c.shape[0] * float(np.sum((c.mean(axis=0) - overall) ** 2)) for c in clusters)
    within = sum(float(np.sum((c - c.mean(axis=0)) ** 2)) for c in clusters)
    if within == 0.0:
        return math.inf  # perfectly tight clusters; keep comparison tables alive
    return (between / (kk - 1)) / (within / (n - kk))


def concept_coverage(
    assignments: Sequence[int],
    labels: Sequence[Hashable],
    target_label: Hashable,
) -> tuple[float, int]:
    """Largest fraction of `target_label` records landing in one cluster, plus that cluster."""
    if len(assignments) != len(labels):
        raise ValueError("assignments and labels must align")
    counts: dict[int, int] = {}
    total = 0
    for cluster, label in zip(assignments, labels):
        if label != target_label:
            continue
        total += 1
        counts[int(cluster)] = counts.get(int(cluster), 0) + 1
    if total == 0:
        raise MetricError(f"label {target_label!r} absent from dataset")
    best = max(sorted(counts), key=lambda j: counts[j])
    # max() keeps the first (lowest) cluster id on ties because of the sort
    return counts[best] / total, best
