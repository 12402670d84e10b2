"""Embedding and post file formats, validation, and stream batching.

Two embedding container formats are supported:

* JSONL: one ``{"id": ..., "vector": [...]}`` object per line. Lossless for
  float64 (values are written with shortest round-trip precision).
* Binary: magic ``DMAP``, format version u16 LE, dim u32 LE, count u64 LE,
  then one row per record: u16 LE id length, UTF-8 id bytes, dim float32 LE.
  Compact and fast; vector components are stored as float32.

Posts live in a separate JSONL file (``id``, ``text``, optional ``timestamp``,
optional ``label``) joined to embeddings by id, so the numeric hot path never
carries strings.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

BINARY_MAGIC = b"DMAP"
BINARY_VERSION = 1


class FormatError(ValueError):
    """Input file violates the documented embedding/post schema."""


class EmptyDatasetError(FormatError):
    """File parsed fine but contains no records."""


@dataclass(frozen=True)
class EmbeddingRecord:
    """One post's id plus its D-dimensional vector; the unit the engine clusters."""

    id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise FormatError(f"record {self.id!r}: vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"record {self.id!r}: vector has non-finite components")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class PostRecord:
    """Raw post text with optional timestamp and evaluation-only label."""

    id: str
    text: str
    timestamp: int | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise FormatError("post with empty id")
        if not self.text:
            raise FormatError(f"post {self.id!r}: empty text")


@dataclass(frozen=True)
class Batch:
    """One ordered slice of the stream; indices are 1-based and strictly increasing."""

    index: int
    records: list[EmbeddingRecord]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("batch index must be positive")
        if not self.records:
            raise ValueError("batch must be non-empty")

    @property
    def vectors(self) -> np.ndarray:
        return np.stack([r.vector for r in self.records])


@dataclass(frozen=True)
class BatchingConfig:
    """How to slice a dataset into a simulated stream."""

    mode: str = "fixed-size"  # "fixed-size" | "timestamp-window"
    size: int = 0
    window_seconds: int = 0

    def __post_init__(self) -> None:
        if self.mode == "fixed-size":
            if self.size < 2:
                raise ValueError("fixed-size batching needs size >= 2")
        elif self.mode == "timestamp-window":
            if self.window_seconds <= 0:
                raise ValueError("timestamp-window batching needs a positive window")
        else:
            raise ValueError(f"unknown batching mode {self.mode!r}")


@dataclass(frozen=True)
class DatasetManifest:
    dim: int
    count: int
    batching: BatchingConfig = field(default_factory=lambda: BatchingConfig(size=2))


def _validate_records(records: Sequence[EmbeddingRecord]) -> int:
    """Check id uniqueness and a shared dimension; return D."""
    if not records:
        raise EmptyDatasetError("dataset contains no records")
    dim = records[0].vector.shape[0]
    seen: set[str] = set()
    for rec in records:
        if not rec.id:
            raise FormatError("record with empty id")
        if rec.id in seen:
            raise FormatError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        if rec.vector.shape[0] != dim:
            raise FormatError(
                f"record {rec.id!r}: vector length {rec.vector.shape[0]} != dataset dim {dim}"
            )
    return dim


def read_embeddings(path: str | Path) -> tuple[list[EmbeddingRecord], int]:
    """Read an embedding file (JSONL or binary, sniffed by magic); returns (records, D)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == BINARY_MAGIC:
        records = _read_binary(path)
    else:
        records = _read_jsonl(path)
    dim = _validate_records(records)
    return records, dim


def _read_jsonl(path: Path) -> list[EmbeddingRecord]:
    records: list[EmbeddingRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                raise FormatError(f"{path}:{lineno}: expected object with 'id' and 'vector'")
            records.append(EmbeddingRecord(id=str(obj["id"]), vector=np.asarray(obj["vector"], dtype=np.float64)))
    return records


def _read_binary(path: Path) -> list[EmbeddingRecord]:
    with open(path, "rb") as fh:
        header = fh.read(18)
        if len(header) != 18 or header[:4] != BINARY_MAGIC:
            raise FormatError(f"{path}: not a DMAP embedding file")
        version, dim, count = struct.unpack("<HIQ", header[4:])
        if version != BINARY_VERSION:
            raise FormatError(f"{path}: unsupported binary format version {version}")
        if dim == 0:
            raise FormatError(f"{path}: header declares dim 0")
        records: list[EmbeddingRecord] = []
        row_fmt = f"<{dim}f"
        row_bytes = 4 * dim
        for i in range(count):
            len_bytes = fh.read(2)
            if len(len_bytes) != 2:
                raise FormatError(f"{path}: truncated at record {i}")
            (id_len,) = struct.unpack("<H", len_bytes)
            id_bytes = fh.read(id_len)
            vec_bytes = fh.read(row_bytes)
            if len(id_bytes) != id_len or len(vec_bytes) != row_bytes:
                raise FormatError(f"{path}: truncated at record {i}")
            rec_id = id_bytes.decode("utf-8")
            vector = np.asarray(struct.unpack(row_fmt, vec_bytes), dtype=np.float64)
            records.append(EmbeddingRecord(id=rec_id, vector=vector))
    return records


def write_embeddings(records: Sequence[EmbeddingRecord], path: str | Path, format: str = "jsonl") -> Path:
    """Write records to `path`. Binary stores float32 components; JSONL is lossless."""
    path = Path(path)
    dim = _validate_records(records)
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps({"id": rec.id, "vector": [float(x) for x in rec.vector]}))
                fh.write("\n")
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<HIQ", BINARY_VERSION, dim, len(records)))
            row_fmt = f"<{dim}f"
            for rec in records:
                id_bytes = rec.id.encode("utf-8")
                if len(id_bytes) > 0xFFFF:
                    raise FormatError(f"record id too long for binary format: {rec.id[:32]!r}...")
                fh.write(struct.pack("<H", len(id_bytes)))
                fh.write(id_bytes)
                fh.write(struct.pack(row_fmt, *np.asarray(rec.vector, dtype=np.float32)))
    else:
        raise ValueError(f"unknown embedding format {format!r}")
    return path


def read_posts(path: str | Path) -> list[PostRecord]:
    """Read the posts JSONL; validates id uniqueness and non-empty text."""
    posts: list[PostRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in obj or "text" not in obj:
                raise FormatError(f"{path}:{lineno}: expected object with 'id' and 'text'")
            post = PostRecord(
                id=str(obj["id"]),
                text=str(obj["text"]),
                timestamp=int(obj["timestamp"]) if obj.get("timestamp") is not None else None,
                label=str(obj["label"]) if obj.get("label") is not None else None,
            )
            if post.id in seen:
                raise FormatError(f"{path}:{lineno}: duplicate post id {post.id!r}")
            seen.add(post.id)
            posts.append(post)
    if not posts:
        raise EmptyDatasetError(f"{path}: no posts")
    return posts


def write_posts(posts: Iterable[PostRecord], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for post in posts:
            obj: dict = {"id": post.id, "text": post.text}
            if post.timestamp is not None:
                obj["timestamp"] = post.timestamp
            if post.label is not None:
                obj["label"] = post.label
            fh.write(json.dumps(obj))
            fh.write("\n")
    return path


def batch_stream(
    records: Sequence[EmbeddingRecord],
    batching: BatchingConfig,
    timestamps: Mapping[str, int] | None = None,
) -> list[Batch]:
    """Slice records into an ordered list of batches.

    Fixed-size mode keeps input order and cuts every `size` records (last batch
    may be short). Timestamp mode partitions by windows of `window_seconds`
    anchored at the first record's timestamp; it requires every record to have
    a timestamp and timestamps to be non-decreasing, so the partition preserves
    stream order. Empty windows are skipped.
    """
    if not records:
        raise EmptyDatasetError("cannot batch an empty dataset")
    _validate_records(records)
    if batching.mode == "fixed-size":
        size = batching.size
        chunks = [list(records[i : i + size]) for i in range(0, len(records), size)]
        return [Batch(index=i + 1, records=chunk) for i, chunk in enumerate(chunks)]

    if timestamps is None:
        raise ValueError("timestamp-window batching needs a timestamps mapping")
    stamps: list[int] = []
    for rec in records:
        if rec.id not in timestamps or timestamps[rec.id] is None:
            raise ValueError(f"record {rec.id!r} lacks a timestamp")
        stamps.append(int(timestamps[rec.id]))
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        raise ValueError("timestamp-window batching needs records sorted by timestamp")

    window = batching.window_seconds
    t0 = stamps[0]
    groups: dict[int, list[EmbeddingRecord]] = {}
    for rec, ts in zip(records, stamps):
        groups.setdefault((ts - t0) // window, []).append(rec)
    batches = []
    for i, key in enumerate(sorted(groups)):
        batches.append(Batch(index=i + 1, records=groups[key]))
    return batches


def build_manifest(records: Sequence[EmbeddingRecord], batching: BatchingConfig) -> DatasetManifest:
    dim = _validate_records(records)
    return DatasetManifest(dim=dim, count=len(records), batching=batching)
