"""Online divisive concept engine.

A ConceptModel starts from a seeded k-means over the first batch and then, for
each incoming batch, runs two kinds of updates:

* local: per concept, distances from every batch record to the concept's
  centroid are summarized by their lo/hi percentiles (l, u), widened by lambda
  into the window [l - lambda*(u-l), u + lambda*(u-l)]. Records beyond the
  window's upper bound are the concept's outliers; when more than
  delta_frac * batch_size of them pile up, the concept is split in two by a
  seeded 2-means over its retained members plus the outliers. The sub-cluster
  nearer the old centroid keeps the concept id; the other becomes a new
  concept, recorded in the lineage list. Only the far side of the window
  flags records: percentiles taken over the whole batch sit at or above the
  concept's own distance band, so a below-window test would brand a small
  concept's core as outliers and shred it on perfectly stationary streams.
  The lower bound is still computed and reported for observability.
* global: one full k-means over everything retained so far, seeded from the
  current centroids so it only nudges them, never re-shuffles k.

Outlier selection is restricted by default to the concept's purview (batch
records whose nearest centroid is that concept); `purview_filter=False` keeps
the window test over all batch records instead.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kmeans import (
    INIT_PLUS_PLUS,
    INIT_PROVIDED,
    KMeansConfig,
    distances_to,
    kmeans_assign,
    kmeans_fit,
    percentile,
)
from .vector_io import Batch, EmbeddingRecord


@dataclass(frozen=True)
class EngineParams:
    k0: int = 2
    lo: float = 40.0
    hi: float = 60.0
    lam: float = 0.25
    delta_frac: float = 0.15
    purview_filter: bool = True
    metric: str = "euclidean"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")
        if not 0 <= self.lo < self.hi <= 100:
            raise ValueError("need 0 <= lo < hi <= 100")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0 < self.delta_frac < 1:
            raise ValueError("delta_frac must be in (0, 1)")
        if self.metric != "euclidean":
            raise ValueError(f"unsupported metric {self.metric!r}; only 'euclidean' is implemented")


@dataclass(frozen=True)
class LineageEntry:
    """Which concept a new concept was split from; root is None for the initial ones."""

    root: int | None
    child: int
    created_at_batch: int


@dataclass
class HistoryRecord:
    record: EmbeddingRecord
    concept: int


@dataclass
class ConceptModel:
    """Persistent engine state: centroids, lineage, retained data, counters."""

    params: EngineParams
    dim: int
    k: int
    cc: np.ndarray  # (k, D)
    ss: list[LineageEntry]
    history: list[HistoryRecord]
    batch_counter: int

    def validate(self) -> None:
        if self.cc.shape != (self.k, self.dim):
            raise ValueError(f"cc shape {self.cc.shape} != (k={self.k}, dim={self.dim})")
        if len(self.ss) != self.k:
            raise ValueError(f"lineage has {len(self.ss)} entries for k={self.k}")
        for hr in self.history:
            if not 0 <= hr.concept < self.k:
                raise ValueError(f"history record {hr.record.id!r} assigned to unknown concept {hr.concept}")

    def history_vectors(self) -> np.ndarray:
        return np.stack([hr.record.vector for hr in self.history])

    def assignments(self) -> dict[str, int]:
        return {hr.record.id: hr.concept for hr in self.history}


@dataclass(frozen=True)
class OutlierScan:
    """detect_outliers output: flagged records plus the window that produced them."""

    records: list[EmbeddingRecord]
    l: float
    u: float
    lower: float
    upper: float


@dataclass(frozen=True)
class BatchOutcome:
    batch_index: int
    outlier_counts: dict[int, int]
    splits: list[tuple[int, int]]  # (root concept, new concept)
    k_after: int
    assignments: dict[str, int]


def _check_dim(model: ConceptModel, batch: Batch) -> np.ndarray:
    vectors = batch.vectors
    if vectors.shape[1] != model.dim:
        raise ValueError(f"batch dim {vectors.shape[1]} != model dim {model.dim}")
    return vectors


def _derived_seed(base: int, *parts: int) -> int:
    # stable per-(batch, concept) streams so a resumed run replays identically
    seed = base & 0xFFFFFFFFFFFFFFFF
    for p in parts:
        seed = (seed * 6364136223846793005 + 2 * p + 1) & 0xFFFFFFFFFFFFFFFF
    return seed


def init_model(first_batch: Batch, params: EngineParams) -> ConceptModel:
    """Fit the k0 initial concepts on the first batch and seed the lineage list."""
    if len(first_batch.records) < params.k0:
        raise ValueError(
            f"first batch has {len(first_batch.records)} records; need at least k0={params.k0}"
        )
    vectors = first_batch.vectors
    result = kmeans_fit(vectors, KMeansConfig(k=params.k0, seed=params.seed, init=INIT_PLUS_PLUS))
    history = [
        HistoryRecord(record=rec, concept=int(c))
        for rec, c in zip(first_batch.records, result.assignments)
    ]
    ss = [LineageEntry(root=None, child=j, created_at_batch=1) for j in range(params.k0)]
    model = ConceptModel(
        params=params,
        dim=vectors.shape[1],
        k=params.k0,
        cc=result.centroids,
        ss=ss,
        history=history,
        batch_counter=1,
    )
    model.validate()
    return model


def detect_outliers(model: ConceptModel, batch: Batch, concept: int) -> OutlierScan:
    """Window the batch's distance distribution to one concept and flag records beyond it.

    Percentiles are always taken over all batch distances to the concept, so
    the window stays stable even for small concepts; the purview filter
    restricts flagging to records whose nearest centroid is this concept.
    Flagged records are those past the widened upper bound; the lower bound is
    reported alongside but flags nothing (see the module docstring).
    """
    if not 0 <= concept < model.k:
        raise ValueError(f"concept {concept} out of range [0, {model.k})")
    vectors = _check_dim(model, batch)
    dists = distances_to(vectors, model.cc[concept])
    l = percentile(dists, model.params.lo)
    u = percentile(dists, model.params.hi)
    lower = l - model.params.lam * (u - l)
    upper = u + model.params.lam * (u - l)
    outside = dists > upper
    if model.params.purview_filter:
        nearest = kmeans_assign(vectors, model.cc)
        outside &= nearest == concept
    records = [rec for rec, flag in zip(batch.records, outside) if flag]
    return OutlierScan(records=records, l=l, u=u, lower=lower, upper=upper)


def local_split(
    model: ConceptModel, concept: int, outliers: list[EmbeddingRecord]
) -> LineageEntry:
    """Split one concept in place: 2-means over its retained members plus the outliers.

    The sub-cluster whose centroid lands nearer the old centroid keeps the
    concept id (ties go to sub-cluster 0); the other becomes concept k. Only
    records of this concept change assignment.
    """
    if not 0 <= concept < model.k:
        raise ValueError(f"concept {concept} out of range [0, {model.k})")
    member_idx = [i for i, hr in enumerate(model.history) if hr.concept == concept]
    member_vecs = [model.history[i].record.vector for i in member_idx]
    union = np.array(member_vecs + [rec.vector for rec in outliers])
    if np.unique(union, axis=0).shape[0] < 2:
        raise ValueError(f"concept {concept}: fewer than 2 distinct points to split")

    seed = _derived_seed(model.params.seed, model.batch_counter + 1, concept)
    result = kmeans_fit(union, KMeansConfig(k=2, seed=seed, init=INIT_PLUS_PLUS))
    old_center = model.cc[concept]
    d0 = float(np.sum((result.centroids[0] - old_center) ** 2))
    d1 = float(np.sum((result.centroids[1] - old_center) ** 2))
    keep = 0 if d0 <= d1 else 1
    new_id = model.k

    model.cc = np.vstack([model.cc, result.centroids[1 - keep][None, :]])
    model.cc[concept] = result.centroids[keep]
    model.k += 1
    entry = LineageEntry(root=concept, child=new_id, created_at_batch=model.batch_counter + 1)
    model.ss.append(entry)
    # reassign only this concept's retained members per the 2-means labels
    for pos, i in enumerate(member_idx):
        if result.assignments[pos] != keep:
            model.history[i].concept = new_id
    return entry


def global_adjust(model: ConceptModel) -> None:
    """One k-means pass over everything retained, seeded from the current centroids."""
    if not model.history:
        return
    vectors = model.history_vectors()
    result = kmeans_fit(
        vectors,
        KMeansConfig(k=model.k, seed=model.params.seed, init=INIT_PROVIDED),
        centroids=model.cc,
    )
    model.cc = result.centroids
    for hr, c in zip(model.history, result.assignments):
        hr.concept = int(c)


def process_batch(model: ConceptModel, batch: Batch) -> BatchOutcome:
    """Run the per-concept local scan, then one global adjustment, over a new batch.

    Only the concepts existing when the batch arrives are scanned; concepts
    created mid-batch wait for the next one. The batch joins the retained
    history before the global pass, so the global fit sees every batch up to
    and including this one.
    """
    vectors = _check_dim(model, batch)
    s = len(batch.records)
    k_before = model.k
    threshold = model.params.delta_frac * s

    outlier_counts: dict[int, int] = {}
    splits: list[tuple[int, int]] = []
    for concept in range(k_before):
        scan = detect_outliers(model, batch, concept)
        outlier_counts[concept] = len(scan.records)
        if len(scan.records) > threshold:
            entry = local_split(model, concept, scan.records)
            splits.append((concept, entry.child))

    nearest = kmeans_assign(vectors, model.cc)
    for rec, c in zip(batch.records, nearest):
        model.history.append(HistoryRecord(record=rec, concept=int(c)))
    global_adjust(model)
    model.batch_counter += 1

    ids = {rec.id for rec in batch.records}
    assignments = {hr.record.id: hr.concept for hr in model.history if hr.record.id in ids}
    outcome = BatchOutcome(
        batch_index=model.batch_counter,
        outlier_counts=outlier_counts,
        splits=splits,
        k_after=model.k,
        assignments=assignments,
    )
    model.validate()
    return outcome


def assign(model: ConceptModel, records: list[EmbeddingRecord]) -> dict[str, int]:
    """Read-only nearest-centroid lookup against the current centroids."""
    if not records:
        return {}
    vectors = np.stack([r.vector for r in records])
    if vectors.shape[1] != model.dim:
        raise ValueError(f"records dim {vectors.shape[1]} != model dim {model.dim}")
    nearest = kmeans_assign(vectors, model.cc)
    return {rec.id: int(c) for rec, c in zip(records, nearest)}


def clone_model(model: ConceptModel) -> ConceptModel:
    """Deep-enough copy for what-if runs; records themselves are immutable."""
    return ConceptModel(
        params=replace(model.params),
        dim=model.dim,
        k=model.k,
        cc=model.cc.copy(),
        ss=list(model.ss),
        history=[HistoryRecord(record=hr.record, concept=hr.concept) for hr in model.history],
        batch_counter=model.batch_counter,
    )
