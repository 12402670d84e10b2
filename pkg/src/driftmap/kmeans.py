"""Deterministic numerical kernel: distances, percentiles, and seeded Lloyd k-means.

Everything here is reproducible bit-for-bit given the same inputs and seed:
k-means++ sampling uses an explicit Generator, centroid means accumulate in
point-index order, and nearest-centroid ties always break to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INIT_PLUS_PLUS = "plus-plus"
INIT_PROVIDED = "provided-centroids"


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iterations: int = 300
    tolerance: float = 1e-6
    seed: int = 0
    init: str = INIT_PLUS_PLUS

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.init not in (INIT_PLUS_PLUS, INIT_PROVIDED):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, D)
    assignments: np.ndarray  # (n,) int
    inertia: float
    iterations: int
    inertia_history: list[float] = field(default_factory=list)


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    """L2 norm of a - b; raises on dimension mismatch."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def distances_to(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Distances of each row of `points` to one center."""
    points = np.asarray(points, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if points.shape[1] != center.shape[0]:
        raise ValueError(f"dimension mismatch: {points.shape[1]} vs {center.shape[0]}")
    return np.sqrt(np.sum((points - center) ** 2, axis=1))


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile over a non-empty collection.

    Sort ascending, rank = p/100 * (n-1), then interpolate between the
    bracketing order statistics.
    """
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile p={p} outside [0, 100]")
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("percentile of empty input")
    rank = p / 100.0 * (arr.size - 1)
    lo = int(np.floor(rank))
    hi = int(np.ceil(rank))
    frac = rank - lo
    return float(arr[lo] + frac * (arr[hi] - arr[lo]))


def kmeans_assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Map each point to its nearest centroid; ties break to the lowest index."""
    points = np.asarray(points, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[0] == 0:
        raise ValueError("empty centroid list")
    if points.shape[1] != centroids.shape[1]:
        raise ValueError(f"dimension mismatch: {points.shape[1]} vs {centroids.shape[1]}")
    # squared distances suffice for argmin; argmin returns the first (lowest) minimum
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining mass at chosen centers (duplicate-heavy data)
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def kmeans_fit(
    points: np.ndarray,
    config: KMeansConfig,
    centroids: np.ndarray | None = None,
) -> KMeansResult:
    """Lloyd's algorithm with seeded k-means++ (or caller-provided centroids).

    Iterates until the largest centroid shift drops below `tolerance` or
    `max_iterations` is hit. Emptied clusters are repaired by promoting the
    point currently farthest from its assigned centroid, which keeps inertia
    non-increasing and prevents k from collapsing.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n = points.shape[0]
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds number of points n={n}")
    if config.init == INIT_PROVIDED:
        if centroids is None:
            raise ValueError("init=provided-centroids needs centroids")
        centers = np.array(centroids, dtype=np.float64, copy=True)
        if centers.shape != (config.k, points.shape[1]):
            raise ValueError(f"provided centroids shape {centers.shape} != ({config.k}, {points.shape[1]})")
    else:
        rng = np.random.default_rng(config.seed)
        centers = _plus_plus_init(points, config.k, rng)

    assignments = kmeans_assign(points, centers)
    history: list[float] = []
    iterations = 0
    for _ in range(config.max_iterations):
        history.append(_inertia(points, centers, assignments))
        new_centers = centers.copy()
        for j in range(config.k):
            members = points[assignments == j]
            if members.shape[0] > 0:
                new_centers[j] = members.mean(axis=0)
        assignments, new_centers = _repair_empty(points, new_centers, assignments)
        iterations += 1
        shift = float(np.max(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1))))
        centers = new_centers
        assignments = kmeans_assign(points, centers)
        if shift < config.tolerance:
            break
    inertia = _inertia(points, centers, assignments)
    history.append(inertia)
    return KMeansResult(
        centroids=centers,
        assignments=assignments,
        inertia=inertia,
        iterations=iterations,
        inertia_history=history,
    )


def _inertia(points: np.ndarray, centers: np.ndarray, assignments: np.ndarray) -> float:
    return float(np.sum((points - centers[assignments]) ** 2))


def _repair_empty(
    points: np.ndarray, centers: np.ndarray, assignments: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Give each empty cluster the point farthest from its current centroid."""
    k = centers.shape[0]
    counts = np.bincount(assignments, minlength=k)
    if np.all(counts > 0):
        return assignments, centers
    assignments = assignments.copy()
    claimed: set[int] = set()
    for j in range(k):
        if counts[j] > 0:
            continue
        dist = np.sum((points - centers[assignments]) ** 2, axis=1)
        for idx in claimed:
            dist[idx] = -1.0
        far = int(np.argmax(dist))
        claimed.add(far)
        centers[j] = points[far]
        counts[assignments[far]] -= 1
        assignments[far] = j
        counts[j] = 1
    return assignments, centers
