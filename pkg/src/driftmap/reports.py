"""Report assembly: quality metrics, lineage, per-concept terms, 2-D projection.

One JSON document is the machine contract; the aligned-text renderings mirror
the usual comparison-table and term-table layouts. The projection is plain
PCA (deterministic, sign-fixed) dumped as x,y,concept CSV rows.
"""

from __future__ import annotations

import math
from typing import Hashable, Mapping, Sequence

import numpy as np

from .baselines import MethodRow
from .engine import ConceptModel
from .metrics import (
    ClusteringView,
    MetricError,
    calinski_harabasz,
    concept_coverage,
    davies_bouldin,
    silhouette,
)
from .terms import CleanText, preprocess, tfidf_by_concept, top_terms
from .vector_io import PostRecord


def model_view(model: ConceptModel) -> ClusteringView:
    return ClusteringView(
        points=model.history_vectors(),
        assignments=np.array([hr.concept for hr in model.history], dtype=np.int64),
        k=model.k,
    )


def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.4f}"


def quality_section(view: ClusteringView) -> dict:
    out: dict = {"n": int(view.points.shape[0]), "clusters": int(len(set(view.assignments.tolist())))}
    try:
        out["davies_bouldin"] = davies_bouldin(view)
        out["silhouette"] = silhouette(view)
        chi = calinski_harabasz(view)
        out["calinski_harabasz"] = "inf" if math.isinf(chi) else chi
    except MetricError as exc:
        out["error"] = str(exc)
    return out


def lineage_section(model: ConceptModel) -> list[dict]:
    return [
        {"root": e.root, "child": e.child, "batch": e.created_at_batch}
        for e in model.ss
    ]


def render_lineage_text(model: ConceptModel) -> str:
    lines = ["Lineage (root -> child @ batch)"]
    for e in model.ss:
        root = "-" if e.root is None else f"C{e.root}"
        lines.append(f"  {root} -> C{e.child} @ batch {e.created_at_batch}")
    return "\n".join(lines)


def terms_section(
    model: ConceptModel,
    posts: Sequence[PostRecord],
    top_n: int,
    link_titles: Mapping[str, str] | None = None,
) -> list[dict]:
    """Top unigrams and combined bigrams/trigrams per concept, from posts joined by id."""
    assignments = model.assignments()
    by_concept: dict[int, list[CleanText]] = {}
    for post in posts:
        concept = assignments.get(post.id)
        if concept is None:
            continue
        by_concept.setdefault(concept, []).append(preprocess(post.text, post_id=post.id, link_titles=link_titles))
    if not by_concept:
        return []
    scores = tfidf_by_concept(by_concept)
    sections = []
    for concept in sorted(by_concept):
        per_size = top_terms(scores, concept, top_n, concepts=set(by_concept))
        multi = sorted(per_size[2] + per_size[3], key=lambda s: (-s.tfidf, s.term))[:top_n]
        sections.append(
            {
                "concept": concept,
                "posts": len(by_concept[concept]),
                "unigrams": [{"term": s.term, "tfidf": s.tfidf} for s in per_size[1]],
                "bigrams_trigrams": [{"term": s.term, "tfidf": s.tfidf} for s in multi],
            }
        )
    return sections


def render_terms_text(sections: Sequence[dict]) -> str:
    if not sections:
        return "Trending terms: (no posts available)"
    width = max(12, max(len(f"C{s['concept']}") for s in sections) + 2)
    lines = [f"{'Concept':<{width}} | Unigrams | Bigrams/Trigrams"]
    for s in sections:
        uni = ", ".join(t["term"] for t in s["unigrams"]) or "-"
        multi = ", ".join(t["term"] for t in s["bigrams_trigrams"]) or "-"
        lines.append(f"{'C' + str(s['concept']):<{width}} | {uni} | {multi}")
    return "\n".join(lines)


def pca_projection(view: ClusteringView, seed: int = 0) -> list[tuple[float, float, int]]:
    """Deterministic 2-D PCA rows (x, y, concept); sign fixed by the largest loading."""
    points = view.points
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[: min(2, vt.shape[0])]
    for i in range(comps.shape[0]):
        pivot = int(np.argmax(np.abs(comps[i])))
        if comps[i, pivot] < 0:
            comps[i] = -comps[i]
    coords = centered @ comps.T
    if coords.shape[1] == 1:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 1))])
    return [(float(x), float(y), int(c)) for (x, y), c in zip(coords, view.assignments)]


def projection_csv(rows: Sequence[tuple[float, float, int]]) -> str:
    lines = ["x,y,concept"]
    lines.extend(f"{x!r},{y!r},{c}" for x, y, c in rows)
    return "\n".join(lines) + "\n"


def coverage_section(
    view: ClusteringView,
    ids: Sequence[str],
    labels_by_id: Mapping[str, str],
    targets: Sequence[str],
) -> dict[str, dict | None]:
    label_list = [labels_by_id.get(i) for i in ids]
    out: dict[str, dict | None] = {}
    for target in targets:
        try:
            frac, cluster = concept_coverage(view.assignments.tolist(), label_list, target)
            out[target] = {"fraction": frac, "cluster": cluster}
        except MetricError:
            out[target] = None
    return out


def render_compare_text(rows: Sequence[MethodRow], coverage_labels: Sequence[Hashable]) -> str:
    headers = ["Approach", "Davies-Bouldin", "Silhouette", "Calinski-Harabasz", "Clusters"]
    headers += [f"{label} Coverage" for label in coverage_labels]
    table = [headers]
    for row in rows:
        if row.error is not None:
            table.append([row.method, f"error: {row.error}", "", "", ""] + ["" for _ in coverage_labels])
            continue
        cells = [
            row.method,
            _fmt(row.dbi),
            _fmt(row.sc),
            "inf" if row.chi is not None and math.isinf(row.chi) else _fmt(row.chi),
            str(row.clusters),
        ]
        for label in coverage_labels:
            cov = row.coverage.get(label)
            cells.append("Not Applicable" if cov is None else f"{100.0 * cov[0]:.2f}% (C{cov[1]})")
        table.append(cells)
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = []
    for r in table:
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def compare_rows_json(rows: Sequence[MethodRow]) -> list[dict]:
    out = []
    for row in rows:
        if row.error is not None:
            out.append({"method": row.method, "error": row.error})
            continue
        out.append(
            {
                "method": row.method,
                "davies_bouldin": row.dbi,
                "silhouette": row.sc,
                "calinski_harabasz": "inf" if row.chi is not None and math.isinf(row.chi) else row.chi,
                "clusters": row.clusters,
                "coverage": {
                    str(label): (None if cov is None else {"fraction": cov[0], "cluster": cov[1]})
                    for label, cov in row.coverage.items()
                },
            }
        )
    return out
