"""Static clusterers the engine is compared against, run on a whole dataset at once.

The Gaussian mixture is a from-scratch EM with diagonal covariances (full
covariances buy nothing at embedding widths like 768 and cost a lot), and mean
shift uses a flat kernel: each point ascends to the mean of its bandwidth
neighborhood, and converged modes closer than `merge_radius` collapse into one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .kmeans import KMeansConfig, kmeans_assign, kmeans_fit, _plus_plus_init
from .metrics import (
    ClusteringView,
    MetricError,
    calinski_harabasz,
    concept_coverage,
    davies_bouldin,
    silhouette,
)


@dataclass(frozen=True)
class GmmConfig:
    k: int
    max_iterations: int = 200
    covariance: str = "diagonal"
    reg: float = 1e-6  # variance floor; keeps components from degenerating
    seed: int = 0
    tolerance: float = 1e-5  # on log-likelihood delta

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.covariance != "diagonal":
            raise ValueError(f"unsupported covariance {self.covariance!r}; only 'diagonal' is implemented")
        if self.reg <= 0:
            raise ValueError("reg must be > 0")


@dataclass(frozen=True)
class MeanShiftConfig:
    bandwidth: float
    max_iterations: int = 300
    merge_radius: float | None = None  # defaults to bandwidth / 2

    def __post_init__(self) -> None:
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")


@dataclass
class GmmResult:
    view: ClusteringView
    means: np.ndarray
    variances: np.ndarray  # diagonal, (k, D)
    weights: np.ndarray
    responsibilities: np.ndarray  # (n, k)
    log_likelihoods: list[float]


@dataclass
class MeanShiftResult:
    view: ClusteringView
    modes: np.ndarray


def static_kmeans(points: np.ndarray, k: int, seed: int = 0) -> ClusteringView:
    result = kmeans_fit(np.asarray(points, dtype=np.float64), KMeansConfig(k=k, seed=seed))
    return ClusteringView(points=np.asarray(points, dtype=np.float64), assignments=result.assignments, k=k)


def _log_gaussian_diag(points: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    diff2 = (points - mean) ** 2
    return -0.5 * (np.sum(diff2 / var + np.log(2.0 * np.pi * var), axis=1))


def gaussian_mixture(points: np.ndarray, config: GmmConfig) -> GmmResult:
    """EM for a diagonal-covariance mixture; log-likelihood is non-decreasing per iteration."""
    points = np.asarray(points, dtype=np.float64)
    n, dim = points.shape
    if n < config.k:
        raise ValueError(f"k={config.k} exceeds number of points n={n}")

    rng = np.random.default_rng(config.seed)
    means = _plus_plus_init(points, config.k, rng)
    global_var = np.maximum(points.var(axis=0), config.reg)
    variances = np.tile(global_var, (config.k, 1))
    weights = np.full(config.k, 1.0 / config.k)

    log_likelihoods: list[float] = []
    resp = np.zeros((n, config.k))
    for _ in range(config.max_iterations):
        # E-step: responsibilities via log-sum-exp
        log_prob = np.stack(
            [np.log(weights[j]) + _log_gaussian_diag(points, means[j], variances[j]) for j in range(config.k)],
            axis=1,
        )
        top = log_prob.max(axis=1, keepdims=True)
        log_norm = top[:, 0] + np.log(np.sum(np.exp(log_prob - top), axis=1))
        resp = np.exp(log_prob - log_norm[:, None])
        ll = float(log_norm.sum())
        if log_likelihoods and abs(ll - log_likelihoods[-1]) < config.tolerance:
            log_likelihoods.append(ll)
            break
        log_likelihoods.append(ll)
        # M-step with a variance floor so no component collapses
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ points) / nk[:, None]
        for j in range(config.k):
            diff2 = (points - means[j]) ** 2
            variances[j] = np.maximum((resp[:, j] @ diff2) / nk[j], config.reg)

    hard = np.argmax(resp, axis=1)
    view = ClusteringView(points=points, assignments=hard, k=config.k)
    return GmmResult(
        view=view,
        means=means,
        variances=variances,
        weights=weights,
        responsibilities=resp,
        log_likelihoods=log_likelihoods,
    )


def median_bandwidth(points: np.ndarray, sample: int = 500, seed: int = 0) -> float:
    """Median pairwise distance on a subsample; a serviceable bandwidth default."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] > sample:
        idx = np.random.default_rng(seed).choice(points.shape[0], size=sample, replace=False)
        points = points[idx]
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2)
    tri = d2[np.triu_indices(points.shape[0], k=1)]
    return float(np.sqrt(np.median(tri))) if tri.size else 1.0


def mean_shift(points: np.ndarray, config: MeanShiftConfig) -> MeanShiftResult:
    """Flat-kernel mode seeking: ascend each point, then merge nearby modes."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] < 1:
        raise ValueError("mean shift needs at least one point")
    bw2 = config.bandwidth**2
    stop = 1e-4 * config.bandwidth
    converged = np.empty_like(points)
    for i in range(points.shape[0]):
        m = points[i]
        for _ in range(config.max_iterations):
            within = np.sum((points - m) ** 2, axis=1) <= bw2
            nxt = points[within].mean(axis=0)
            shift = float(np.sqrt(np.sum((nxt - m) ** 2)))
            m = nxt
            if shift < stop:
                break
        converged[i] = m

    merge_radius = config.merge_radius if config.merge_radius is not None else config.bandwidth / 2.0
    modes: list[np.ndarray] = []
    for i in range(points.shape[0]):  # ascending point order keeps merging deterministic
        m = converged[i]
        for mode in modes:
            if np.sqrt(np.sum((m - mode) ** 2)) <= merge_radius:
                break
        else:
            modes.append(m)
    mode_arr = np.stack(modes)
    labels = kmeans_assign(points, mode_arr)
    view = ClusteringView(points=points, assignments=labels, k=mode_arr.shape[0])
    return MeanShiftResult(view=view, modes=mode_arr)


@dataclass
class MethodRow:
    """One comparison-table row; `error` is set instead of metrics when the method failed."""

    method: str
    clusters: int | None = None
    dbi: float | None = None
    sc: float | None = None
    chi: float | None = None
    coverage: dict[Hashable, tuple[float, int] | None] = field(default_factory=dict)
    error: str | None = None


def _score_view(
    row: MethodRow,
    view: ClusteringView,
    labels: Sequence[Hashable] | None,
    coverage_labels: Sequence[Hashable],
) -> None:
    row.clusters = len({int(a) for a in view.assignments})
    row.dbi = davies_bouldin(view)
    row.sc = silhouette(view)
    row.chi = calinski_harabasz(view)
    for target in coverage_labels:
        if labels is None:
            row.coverage[target] = None
            continue
        try:
            row.coverage[target] = concept_coverage(view.assignments.tolist(), labels, target)
        except MetricError:
            row.coverage[target] = None


def compare_report(
    points: np.ndarray,
    labels: Sequence[Hashable] | None = None,
    methods: Sequence[str] = ("kmeans", "gmm", "meanshift"),
    *,
    k: int = 9,
    seed: int = 0,
    bandwidth: float | None = None,
    coverage_labels: Sequence[Hashable] = (),
    extra_views: dict[str, ClusteringView] | None = None,
) -> list[MethodRow]:
    """Run each baseline plus any externally supplied clustering (e.g. the engine's).

    A failing method contributes a row with its error message; the rest of the
    table still renders.
    """
    points = np.asarray(points, dtype=np.float64)
    known = {"kmeans", "gmm", "meanshift"}
    for name in methods:
        if name not in known:
            raise ValueError(f"unknown method {name!r}; expected one of {sorted(known)}")

    rows: list[MethodRow] = []
    for name, view in (extra_views or {}).items():
        row = MethodRow(method=name)
        try:
            _score_view(row, view, labels, coverage_labels)
        except (MetricError, ValueError) as exc:
            row.error = str(exc)
        rows.append(row)

    for name in methods:
        row = MethodRow(method=name)
        try:
            if name == "kmeans":
                view = static_kmeans(points, k=k, seed=seed)
            elif name == "gmm":
                view = gaussian_mixture(points, GmmConfig(k=k, seed=seed)).view
            else:
                bw = bandwidth if bandwidth is not None else median_bandwidth(points, seed=seed)
                view = mean_shift(points, MeanShiftConfig(bandwidth=bw)).view
            _score_view(row, view, labels, coverage_labels)
        except (MetricError, ValueError) as exc:
            row.error = str(exc)
        rows.append(row)
    return rows
