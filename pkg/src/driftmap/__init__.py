"""Online concept discovery over embedding streams.

The engine keeps an evolving set of concepts (clusters) over batches of
embedding vectors: per-concept percentile windows flag outliers, heavy outlier
loads trigger local 2-means splits recorded in a lineage list, and a
centroid-seeded global k-means keeps everything gently adjusted. Around the
engine: file formats and batching, quality metrics, static baselines,
per-concept term reports, synthetic drift scenarios, snapshots, and an HTTP
service with a thin CLI client.
"""

from .engine import (
    BatchOutcome,
    ConceptModel,
    EngineParams,
    LineageEntry,
    assign,
    detect_outliers,
    global_adjust,
    init_model,
    local_split,
    process_batch,
)
from .kmeans import KMeansConfig, KMeansResult, euclidean_distance, kmeans_assign, kmeans_fit, percentile
from .metrics import ClusteringView, calinski_harabasz, concept_coverage, davies_bouldin, silhouette
from .vector_io import Batch, BatchingConfig, EmbeddingRecord, PostRecord, batch_stream, read_embeddings, write_embeddings

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchingConfig",
    "BatchOutcome",
    "ClusteringView",
    "ConceptModel",
    "EmbeddingRecord",
    "EngineParams",
    "KMeansConfig",
    "KMeansResult",
    "LineageEntry",
    "PostRecord",
    "assign",
    "batch_stream",
    "calinski_harabasz",
    "concept_coverage",
    "davies_bouldin",
    "detect_outliers",
    "euclidean_distance",
    "global_adjust",
    "init_model",
    "kmeans_assign",
    "kmeans_fit",
    "local_split",
    "percentile",
    "process_batch",
    "read_embeddings",
    "silhouette",
    "write_embeddings",
]
