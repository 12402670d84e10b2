"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, Field

from ..engine import EngineParams


class EngineParamsModel(BaseModel):
    k0: int = 2
    lo: float = 40.0
    hi: float = 60.0
    lam: float = Field(default=0.25, alias="lambda")
    delta_frac: float = 0.15
    purview_filter: bool = True
    metric: str = "euclidean"
    seed: int = 0

    model_config = {"populate_by_name": True}

    def to_params(self) -> EngineParams:
        return EngineParams(
            k0=self.k0,
            lo=self.lo,
            hi=self.hi,
            lam=self.lam,
            delta_frac=self.delta_frac,
            purview_filter=self.purview_filter,
            metric=self.metric,
            seed=self.seed,
        )

    @classmethod
    def from_params(cls, params: EngineParams) -> "EngineParamsModel":
        return cls(
            k0=params.k0,
            lo=params.lo,
            hi=params.hi,
            lam=params.lam,
            delta_frac=params.delta_frac,
            purview_filter=params.purview_filter,
            metric=params.metric,
            seed=params.seed,
        )


class RecordModel(BaseModel):
    id: str
    vector: list[float]


class PostModel(BaseModel):
    id: str
    text: str
    timestamp: int | None = None
    label: str | None = None


class CreateSessionRequest(BaseModel):
    params: EngineParamsModel | None = None
    snapshot: dict[str, Any] | None = None  # inline-mode snapshot document


class LineageModel(BaseModel):
    root: int | None
    child: int
    batch: int


class SessionInfo(BaseModel):
    session_id: str
    initialized: bool
    dim: int | None
    k: int | None
    batch_counter: int
    params: EngineParamsModel
    lineage: list[LineageModel]


class BatchRequest(BaseModel):
    records: list[RecordModel]


class BatchOutcomeModel(BaseModel):
    batch_index: int
    outlier_counts: dict[int, int]
    splits: list[tuple[int, int]]
    k_after: int
    assignments: dict[str, int]


class AssignRequest(BaseModel):
    records: list[RecordModel]


class AssignResponse(BaseModel):
    assignments: dict[str, int]


class ReportRequest(BaseModel):
    posts: list[PostModel] | None = None
    top_terms: int = 10
    coverage_labels: list[str] = Field(default_factory=list)
    include_projection: bool = False


class SynthRequest(BaseModel):
    scenario: dict[str, Any]


class SynthBatchModel(BaseModel):
    index: int
    records: list[RecordModel]


class SynthResponse(BaseModel):
    dim: int
    batches: list[SynthBatchModel]
    labels: dict[str, str]


class EngineEvalModel(BaseModel):
    params: EngineParamsModel = Field(default_factory=EngineParamsModel)
    batch_size: int = 500


class EvalRequest(BaseModel):
    records: list[RecordModel]
    labels: dict[str, str] | None = None
    methods: list[Literal["kmeans", "gmm", "meanshift"]] = Field(
        default_factory=lambda: ["kmeans", "gmm", "meanshift"]
    )
    k: int = 9
    seed: int = 0
    bandwidth: float | None = None
    coverage_labels: list[str] = Field(default_factory=list)
    engine: EngineEvalModel | None = Field(default_factory=EngineEvalModel)


class EvalResponse(BaseModel):
    rows: list[dict[str, Any]]
    text: str
