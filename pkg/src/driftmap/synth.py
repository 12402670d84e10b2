"""Scripted synthetic embedding streams with ground truth; the engine's test oracle.

A scenario is a mixture of isotropic Gaussian blobs with two kinds of scripted
events: a brand-new blob emerging, or a fraction of an existing blob's mass
splitting off at a fixed offset. Separations of at least 6 sigma are enforced
so the ground-truth labels stay unambiguous.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .engine import BatchOutcome, ConceptModel, EngineParams, init_model, process_batch
from .metrics import concept_coverage
from .vector_io import Batch, EmbeddingRecord


@dataclass(frozen=True)
class BlobSpec:
    label: str
    mean: np.ndarray
    sigma: float
    weight: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        if self.sigma <= 0:
            raise ValueError(f"blob {self.label!r}: sigma must be > 0")
        if self.weight <= 0:
            raise ValueError(f"blob {self.label!r}: weight must be > 0")
        object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class EmergeEvent:
    at_batch: int
    blob: BlobSpec


@dataclass(frozen=True)
class SplitEvent:
    at_batch: int
    parent: str
    offset: np.ndarray
    fraction: float

    def __post_init__(self) -> None:
        if not 0 < self.fraction < 1:
            raise ValueError("split fraction must be in (0, 1)")
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64))


@dataclass(frozen=True)
class DriftScenario:
    dim: int
    batch_size: int
    n_batches: int
    blobs: list[BlobSpec]
    events: list[EmergeEvent | SplitEvent] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.batch_size < 2 or self.n_batches < 1:
            raise ValueError("need dim >= 1, batch_size >= 2, n_batches >= 1")
        if not self.blobs:
            raise ValueError("need at least one initial blob")
        for blob in self.blobs:
            if blob.mean.shape != (self.dim,):
                raise ValueError(f"blob {blob.label!r}: mean has wrong dimension")
        for ev in self.events:
            if not 2 <= ev.at_batch <= self.n_batches:
                raise ValueError(f"event batch {ev.at_batch} outside [2, {self.n_batches}]")
        _check_separations(self)


def _check_separations(scenario: DriftScenario) -> None:
    """Every pair of component means must sit >= 6 sigma apart when both are active."""
    active: dict[str, BlobSpec] = {}
    for blob in scenario.blobs:
        for other in active.values():
            gap = float(np.sqrt(np.sum((blob.mean - other.mean) ** 2)))
            if gap < 6.0 * max(blob.sigma, other.sigma):
                raise ValueError(
                    f"blobs {blob.label!r} and {other.label!r} only {gap:.3f} apart; "
                    f"need >= {6.0 * max(blob.sigma, other.sigma):.3f}"
                )
        if blob.label in active:
            raise ValueError(f"duplicate component label {blob.label!r}")
        active[blob.label] = blob
    for ev in sorted(scenario.events, key=lambda e: e.at_batch):
        if isinstance(ev, EmergeEvent):
            new_mean, new_sigma, label = ev.blob.mean, ev.blob.sigma, ev.blob.label
        else:
            if ev.parent not in active:
                raise ValueError(f"split parent {ev.parent!r} unknown at batch {ev.at_batch}")
            parent = active[ev.parent]
            new_mean, new_sigma = parent.mean + ev.offset, parent.sigma
            label = f"{ev.parent}-child"
        for other in active.values():
            gap = float(np.sqrt(np.sum((new_mean - other.mean) ** 2)))
            if gap < 6.0 * max(new_sigma, other.sigma):
                raise ValueError(
                    f"event at batch {ev.at_batch}: new mean only {gap:.3f} from {other.label!r}; "
                    f"need >= {6.0 * max(new_sigma, other.sigma):.3f}"
                )
        if label in active:
            raise ValueError(f"duplicate component label {label!r}")
        active[label] = BlobSpec(label=label, mean=new_mean, sigma=new_sigma, weight=1.0)


@dataclass
class _Component:
    label: str
    mean: np.ndarray
    sigma: float
    weight: float


def generate(scenario: DriftScenario) -> tuple[list[Batch], dict[str, str]]:
    """Sample the stream: batch t is i.i.d. from the mixture active at t.

    An emerging blob takes its configured weight as a batch fraction (existing
    weights rescale to make room); a split moves `fraction` of the parent's
    weight to a child at parent.mean + offset, labelled `<parent>-child`.
    """
    rng = np.random.default_rng(scenario.seed)
    components = [
        _Component(label=b.label, mean=b.mean.copy(), sigma=b.sigma, weight=b.weight)
        for b in scenario.blobs
    ]
    total = sum(c.weight for c in components)
    for c in components:
        c.weight /= total

    events_by_batch: dict[int, list[EmergeEvent | SplitEvent]] = {}
    for ev in scenario.events:
        events_by_batch.setdefault(ev.at_batch, []).append(ev)

    batches: list[Batch] = []
    truth: dict[str, str] = {}
    for b in range(1, scenario.n_batches + 1):
        for ev in events_by_batch.get(b, []):
            if isinstance(ev, EmergeEvent):
                w = ev.blob.weight
                for c in components:
                    c.weight *= 1.0 - w
                components.append(
                    _Component(label=ev.blob.label, mean=ev.blob.mean.copy(), sigma=ev.blob.sigma, weight=w)
                )
            else:
                parent = next(c for c in components if c.label == ev.parent)
                child_w = parent.weight * ev.fraction
                parent.weight -= child_w
                components.append(
                    _Component(
                        label=f"{ev.parent}-child",
                        mean=parent.mean + ev.offset,
                        sigma=parent.sigma,
                        weight=child_w,
                    )
                )
        weights = np.array([c.weight for c in components])
        weights = weights / weights.sum()
        picks = rng.choice(len(components), size=scenario.batch_size, p=weights)
        records = []
        for i, pick in enumerate(picks):
            comp = components[int(pick)]
            vec = comp.mean + comp.sigma * rng.standard_normal(scenario.dim)
            rec_id = f"b{b:04d}-r{i:05d}"
            records.append(EmbeddingRecord(id=rec_id, vector=vec))
            truth[rec_id] = comp.label
        batches.append(Batch(index=b, records=records))
    return batches, truth


def scenario_from_dict(obj: Mapping) -> DriftScenario:
    """Build a scenario from the documented JSON schema."""
    events: list[EmergeEvent | SplitEvent] = []
    for ev in obj.get("events", []):
        kind = ev.get("kind")
        if kind == "emerge":
            blob = ev["blob"]
            events.append(
                EmergeEvent(
                    at_batch=int(ev["at_batch"]),
                    blob=BlobSpec(
                        label=str(blob["label"]),
                        mean=np.asarray(blob["mean"], dtype=np.float64),
                        sigma=float(blob["sigma"]),
                        weight=float(blob["weight"]),
                    ),
                )
            )
        elif kind == "split":
            events.append(
                SplitEvent(
                    at_batch=int(ev["at_batch"]),
                    parent=str(ev["parent"]),
                    offset=np.asarray(ev["offset"], dtype=np.float64),
                    fraction=float(ev["fraction"]),
                )
            )
        else:
            raise ValueError(f"unknown event kind {kind!r}")
    return DriftScenario(
        dim=int(obj["dim"]),
        batch_size=int(obj["batch_size"]),
        n_batches=int(obj["n_batches"]),
        blobs=[
            BlobSpec(
                label=str(b["label"]),
                mean=np.asarray(b["mean"], dtype=np.float64),
                sigma=float(b["sigma"]),
                weight=float(b["weight"]),
            )
            for b in obj["blobs"]
        ],
        events=events,
        seed=int(obj.get("seed", 0)),
    )


def load_scenario(path: str | Path) -> DriftScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


@dataclass
class StreamRun:
    """One engine pass over a generated stream, with enough trace to judge it."""

    model: ConceptModel
    outcomes: list[BatchOutcome]
    centroid_trace: dict[int, np.ndarray]  # batch number -> cc at entry of that batch


def run_stream(batches: Sequence[Batch], params: EngineParams) -> StreamRun:
    """Initialize on the first batch, process the rest, recording centroids per batch."""
    if not batches:
        raise ValueError("empty stream")
    model = init_model(batches[0], params)
    trace = {1: model.cc.copy()}
    outcomes: list[BatchOutcome] = []
    for batch in batches[1:]:
        trace[model.batch_counter + 1] = model.cc.copy()
        outcomes.append(process_batch(model, batch))
    return StreamRun(model=model, outcomes=outcomes, centroid_trace=trace)


@dataclass(frozen=True)
class EventEval:
    at_batch: int
    detected_at: int | None
    latency: int | None
    concept: int | None
    lineage_correct: bool | None


@dataclass(frozen=True)
class RunEvaluation:
    events: list[EventEval]
    final_ari: float
    coverage: dict[str, tuple[float, int]]


def adjusted_rand_index(labels_a: Sequence, labels_b: Sequence) -> float:
    """ARI by the direct pair-counting formula over the contingency table."""
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences must align")
    n = len(labels_a)
    if n < 2:
        raise ValueError("ARI needs at least 2 items")
    table: dict[tuple, int] = {}
    rows: dict = {}
    cols: dict = {}
    for a, b in zip(labels_a, labels_b):
        table[(a, b)] = table.get((a, b), 0) + 1
        rows[a] = rows.get(a, 0) + 1
        cols[b] = cols.get(b, 0) + 1
    sum_ij = sum(math.comb(v, 2) for v in table.values())
    sum_a = sum(math.comb(v, 2) for v in rows.values())
    sum_b = sum(math.comb(v, 2) for v in cols.values())
    pairs = math.comb(n, 2)
    expected = sum_a * sum_b / pairs
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0 if sum_ij == max_index else 0.0
    return (sum_ij - expected) / (max_index - expected)


def _event_reference_means(
    scenario: DriftScenario,
) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Per event: (batch, new component mean, parent-or-neighbor mean)."""
    active = {b.label: (b.mean, b.sigma) for b in scenario.blobs}
    out = []
    for ev in sorted(scenario.events, key=lambda e: e.at_batch):
        if isinstance(ev, EmergeEvent):
            new_mean = ev.blob.mean
            neighbor = min(active.values(), key=lambda ms: float(np.sum((ms[0] - new_mean) ** 2)))[0]
            active[ev.blob.label] = (new_mean, ev.blob.sigma)
            out.append((ev.at_batch, new_mean, neighbor))
        else:
            parent_mean, parent_sigma = active[ev.parent]
            new_mean = parent_mean + ev.offset
            active[f"{ev.parent}-child"] = (new_mean, parent_sigma)
            out.append((ev.at_batch, new_mean, parent_mean))
    return out


def evaluate_run(run: StreamRun, truth: Mapping[str, str], scenario: DriftScenario) -> RunEvaluation:
    """Judge a run against its generator: event latency, lineage, final ARI, coverage."""
    model = run.model
    assignments = model.assignments()
    missing = [rid for rid in assignments if rid not in truth]
    if missing:
        raise ValueError(f"record ids absent from ground truth, e.g. {missing[0]!r}")
    ids = list(assignments)
    ari = adjusted_rand_index([truth[i] for i in ids], [assignments[i] for i in ids])

    events: list[EventEval] = []
    attributed: set[int] = set()
    for at_batch, new_mean, ref_mean in _event_reference_means(scenario):
        candidates = [
            e
            for e in model.ss
            if e.root is not None and e.created_at_batch >= at_batch and e.child not in attributed
        ]
        if not candidates:
            events.append(
                EventEval(at_batch=at_batch, detected_at=None, latency=None, concept=None, lineage_correct=None)
            )
            continue
        best = min(
            candidates,
            key=lambda e: float(np.sum((model.cc[e.child] - new_mean) ** 2)),
        )
        attributed.add(best.child)
        cc_at_event = run.centroid_trace.get(at_batch)
        lineage_ok = None
        if cc_at_event is not None:
            d = np.sum((cc_at_event - ref_mean) ** 2, axis=1)
            lineage_ok = int(np.argmin(d)) == best.root
        events.append(
            EventEval(
                at_batch=at_batch,
                detected_at=best.created_at_batch,
                latency=best.created_at_batch - at_batch,
                concept=best.child,
                lineage_correct=lineage_ok,
            )
        )

    coverage: dict[str, tuple[float, int]] = {}
    truth_list = [truth[i] for i in ids]
    assign_list = [assignments[i] for i in ids]
    for label in sorted(set(truth_list)):
        coverage[label] = concept_coverage(assign_list, truth_list, label)
    return RunEvaluation(events=events, final_ari=ari, coverage=coverage)
