"""Durable, versioned ConceptModel serialization (`.dmap.json`).

Snapshots are canonical JSON: sorted keys, compact separators, floats written
with shortest round-trip precision, and a SHA-256 digest over everything else
embedded in the document. History vectors are stored by reference to the
dataset file by default (ids only); inline mode embeds them for self-contained
snapshots at the cost of size.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import ConceptModel, EngineParams, HistoryRecord, LineageEntry
from .vector_io import EmbeddingRecord, read_embeddings

SCHEMA_VERSION = 1


class SnapshotError(ValueError):
    pass


class DigestMismatchError(SnapshotError):
    pass


class UnsupportedVersionError(SnapshotError):
    pass


class MissingDependencyError(SnapshotError):
    """Reference-mode snapshot needs a dataset that was not found."""


def _canonical_bytes(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def _digest(doc: dict) -> str:
    return hashlib.sha256(_canonical_bytes(doc)).hexdigest()


def model_to_doc(model: ConceptModel, *, inline_vectors: bool, dataset: str | None = None) -> dict:
    """Snapshot document sans digest."""
    if not inline_vectors and dataset is None:
        raise SnapshotError("reference-mode snapshot needs a dataset path")
    p = model.params
    history = []
    for hr in model.history:
        entry: dict = {"id": hr.record.id, "concept": hr.concept}
        if inline_vectors:
            entry["vector"] = [float(x) for x in hr.record.vector]
        history.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "params": {
            "k0": p.k0,
            "lo": p.lo,
            "hi": p.hi,
            "lambda": p.lam,
            "delta_frac": p.delta_frac,
            "purview_filter": p.purview_filter,
            "metric": p.metric,
            "seed": p.seed,
        },
        "dim": model.dim,
        "k": model.k,
        "cc": [[float(x) for x in row] for row in model.cc],
        "ss": [
            {"root": e.root, "child": e.child, "created_at_batch": e.created_at_batch}
            for e in model.ss
        ],
        "batch_counter": model.batch_counter,
        "history": {
            "mode": "inline" if inline_vectors else "reference",
            "dataset": dataset,
            "records": history,
        },
    }


def snapshot_bytes(model: ConceptModel, *, inline_vectors: bool = False, dataset: str | None = None) -> bytes:
    doc = model_to_doc(model, inline_vectors=inline_vectors, dataset=dataset)
    doc["digest"] = _digest(doc)
    return _canonical_bytes(doc) + b"\n"


def save_model(
    model: ConceptModel,
    path: str | Path,
    *,
    inline_vectors: bool = False,
    dataset: str | None = None,
) -> Path:
    """Write the canonical snapshot; returns the path written."""
    path = Path(path)
    path.write_bytes(snapshot_bytes(model, inline_vectors=inline_vectors, dataset=dataset))
    return path


def _params_from_doc(obj: dict) -> EngineParams:
    return EngineParams(
        k0=int(obj["k0"]),
        lo=float(obj["lo"]),
        hi=float(obj["hi"]),
        lam=float(obj["lambda"]),
        delta_frac=float(obj["delta_frac"]),
        purview_filter=bool(obj["purview_filter"]),
        metric=str(obj["metric"]),
        seed=int(obj["seed"]),
    )


def model_from_doc(doc: dict, dataset: str | Path | Sequence[EmbeddingRecord] | None = None) -> ConceptModel:
    """Rebuild a model from a parsed snapshot document (digest already verified)."""
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise UnsupportedVersionError(f"snapshot schema version {version!r}; supported: {SCHEMA_VERSION}")
    dim = int(doc["dim"])

    hist = doc["history"]
    vectors_by_id: dict[str, np.ndarray] = {}
    if hist["mode"] == "reference":
        source = dataset if dataset is not None else hist.get("dataset")
        if source is None:
            raise MissingDependencyError("reference snapshot carries no dataset path and none was given")
        if isinstance(source, (str, Path)):
            if not Path(source).exists():
                raise MissingDependencyError(f"dataset file not found: {source}")
            records, ds_dim = read_embeddings(source)
        else:
            records = list(source)
            ds_dim = records[0].vector.shape[0] if records else 0
        if ds_dim != dim:
            raise SnapshotError(f"dataset dim {ds_dim} != snapshot dim {dim}")
        vectors_by_id = {rec.id: rec.vector for rec in records}
    elif hist["mode"] != "inline":
        raise SnapshotError(f"unknown history mode {hist['mode']!r}")

    history: list[HistoryRecord] = []
    for entry in hist["records"]:
        rid = str(entry["id"])
        if hist["mode"] == "inline":
            vector = np.asarray(entry["vector"], dtype=np.float64)
        else:
            if rid not in vectors_by_id:
                raise MissingDependencyError(f"record {rid!r} missing from dataset")
            vector = vectors_by_id[rid]
        if vector.shape[0] != dim:
            raise SnapshotError(f"record {rid!r}: vector dim {vector.shape[0]} != snapshot dim {dim}")
        history.append(HistoryRecord(record=EmbeddingRecord(id=rid, vector=vector), concept=int(entry["concept"])))

    model = ConceptModel(
        params=_params_from_doc(doc["params"]),
        dim=dim,
        k=int(doc["k"]),
        cc=np.asarray(doc["cc"], dtype=np.float64),
        ss=[
            LineageEntry(
                root=None if e["root"] is None else int(e["root"]),
                child=int(e["child"]),
                created_at_batch=int(e["created_at_batch"]),
            )
            for e in doc["ss"]
        ],
        history=history,
        batch_counter=int(doc["batch_counter"]),
    )
    model.validate()
    return model


def verify_and_parse(data: bytes) -> dict:
    """Parse snapshot bytes and check the embedded digest."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "digest" not in doc:
        raise SnapshotError("snapshot lacks a digest field")
    claimed = doc.pop("digest")
    actual = _digest(doc)
    if claimed != actual:
        raise DigestMismatchError(f"snapshot digest mismatch: file says {claimed[:12]}..., content is {actual[:12]}...")
    return doc


def load_model(path: str | Path, dataset: str | Path | Sequence[EmbeddingRecord] | None = None) -> ConceptModel:
    """Read, verify, and rebuild; `dataset` overrides the snapshot's recorded path."""
    doc = verify_and_parse(Path(path).read_bytes())
    return model_from_doc(doc, dataset=dataset)
