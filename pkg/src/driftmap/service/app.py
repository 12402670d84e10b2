"""FastAPI service holding engine sessions in memory.

A session wraps one ConceptModel behind a lock: exactly one request mutates it
at a time (the engine is single-writer), reads serialize behind the same lock.
Sessions either start fresh (first posted batch initializes the model) or
resume from an inline-mode snapshot document supplied by the client. All file
I/O stays client-side; this service speaks records and documents.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from .. import baselines, reports, synth
from ..engine import ConceptModel, EngineParams, assign, init_model, process_batch
from ..snapshot import SnapshotError, model_from_doc, snapshot_bytes
from ..vector_io import Batch, EmbeddingRecord, PostRecord
from .schemas import (
    AssignRequest,
    AssignResponse,
    BatchOutcomeModel,
    BatchRequest,
    CreateSessionRequest,
    EngineParamsModel,
    EvalRequest,
    EvalResponse,
    LineageModel,
    RecordModel,
    ReportRequest,
    SessionInfo,
    SynthBatchModel,
    SynthRequest,
    SynthResponse,
)


@dataclass
class Session:
    params: EngineParams
    model: ConceptModel | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _records(models: list[RecordModel]) -> list[EmbeddingRecord]:
    try:
        return [EmbeddingRecord(id=m.id, vector=np.asarray(m.vector, dtype=np.float64)) for m in models]
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _session_info(sid: str, session: Session) -> SessionInfo:
    model = session.model
    return SessionInfo(
        session_id=sid,
        initialized=model is not None,
        dim=None if model is None else model.dim,
        k=None if model is None else model.k,
        batch_counter=0 if model is None else model.batch_counter,
        params=EngineParamsModel.from_params(session.params),
        lineage=[]
        if model is None
        else [LineageModel(root=e.root, child=e.child, batch=e.created_at_batch) for e in model.ss],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="driftmap", description="Online concept discovery over embedding streams.")
    sessions: dict[str, Session] = {}

    def _get(sid: str) -> Session:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")
        return sessions[sid]

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "sessions": len(sessions)}

    @app.post("/sessions", response_model=SessionInfo)
    def create_session(req: CreateSessionRequest) -> SessionInfo:
        sid = uuid.uuid4().hex[:12]
        if req.snapshot is not None:
            try:
                model = model_from_doc(dict(req.snapshot))
            except (SnapshotError, ValueError, KeyError) as exc:
                raise HTTPException(status_code=422, detail=f"bad snapshot: {exc}") from exc
            sessions[sid] = Session(params=model.params, model=model)
        else:
            params_model = req.params or EngineParamsModel()
            try:
                sessions[sid] = Session(params=params_model.to_params())
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return _session_info(sid, sessions[sid])

    @app.get("/sessions/{sid}", response_model=SessionInfo)
    def get_session(sid: str) -> SessionInfo:
        return _session_info(sid, _get(sid))

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        _get(sid)
        del sessions[sid]
        return {"deleted": sid}

    @app.post("/sessions/{sid}/batches", response_model=BatchOutcomeModel)
    def post_batch(sid: str, req: BatchRequest) -> BatchOutcomeModel:
        session = _get(sid)
        records = _records(req.records)
        if not records:
            raise HTTPException(status_code=422, detail="batch must be non-empty")
        with session.lock:
            try:
                if session.model is None:
                    session.model = init_model(Batch(index=1, records=records), session.params)
                    model = session.model
                    return BatchOutcomeModel(
                        batch_index=1,
                        outlier_counts={},
                        splits=[],
                        k_after=model.k,
                        assignments=model.assignments(),
                    )
                batch = Batch(index=session.model.batch_counter + 1, records=records)
                outcome = process_batch(session.model, batch)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return BatchOutcomeModel(
            batch_index=outcome.batch_index,
            outlier_counts=outcome.outlier_counts,
            splits=outcome.splits,
            k_after=outcome.k_after,
            assignments=outcome.assignments,
        )

    @app.post("/sessions/{sid}/assign", response_model=AssignResponse)
    def post_assign(sid: str, req: AssignRequest) -> AssignResponse:
        session = _get(sid)
        with session.lock:
            if session.model is None:
                raise HTTPException(status_code=409, detail="session has no model yet")
            try:
                result = assign(session.model, _records(req.records))
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return AssignResponse(assignments=result)

    @app.get("/sessions/{sid}/snapshot")
    def get_snapshot(sid: str) -> Response:
        session = _get(sid)
        with session.lock:
            if session.model is None:
                raise HTTPException(status_code=409, detail="session has no model yet")
            payload = snapshot_bytes(session.model, inline_vectors=True)
        return Response(content=payload, media_type="application/json")

    @app.post("/sessions/{sid}/report")
    def post_report(sid: str, req: ReportRequest) -> dict:
        session = _get(sid)
        with session.lock:
            if session.model is None:
                raise HTTPException(status_code=409, detail="session has no model yet")
            model = session.model
            view = reports.model_view(model)
            doc: dict = {
                "k": model.k,
                "batch_counter": model.batch_counter,
                "metrics": reports.quality_section(view),
                "lineage": reports.lineage_section(model),
            }
            posts = None
            if req.posts:
                posts = [
                    PostRecord(id=p.id, text=p.text, timestamp=p.timestamp, label=p.label)
                    for p in req.posts
                ]
                doc["terms"] = reports.terms_section(model, posts, top_n=req.top_terms)
            else:
                doc["terms"] = None
            if req.coverage_labels:
                ids = [hr.record.id for hr in model.history]
                labels_by_id = {p.id: p.label for p in posts or [] if p.label is not None}
                doc["coverage"] = reports.coverage_section(view, ids, labels_by_id, req.coverage_labels)
            if req.include_projection:
                doc["projection"] = [
                    {"x": x, "y": y, "concept": c} for x, y, c in reports.pca_projection(view)
                ]
        return doc

    @app.post("/synth", response_model=SynthResponse)
    def post_synth(req: SynthRequest) -> SynthResponse:
        try:
            scenario = synth.scenario_from_dict(req.scenario)
            batches, truth = synth.generate(scenario)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=f"bad scenario: {exc}") from exc
        return SynthResponse(
            dim=scenario.dim,
            batches=[
                SynthBatchModel(
                    index=b.index,
                    records=[RecordModel(id=r.id, vector=[float(x) for x in r.vector]) for r in b.records],
                )
                for b in batches
            ],
            labels=truth,
        )

    @app.post("/eval", response_model=EvalResponse)
    def post_eval(req: EvalRequest) -> EvalResponse:
        records = _records(req.records)
        if not records:
            raise HTTPException(status_code=422, detail="dataset must be non-empty")
        dims = {r.vector.shape[0] for r in records}
        if len(dims) != 1:
            raise HTTPException(status_code=422, detail=f"records carry mixed dimensions {sorted(dims)}")
        points = np.stack([r.vector for r in records])
        labels = None
        if req.labels is not None:
            labels = [req.labels.get(r.id) for r in records]

        extra_views = {}
        if req.engine is not None:
            from ..vector_io import BatchingConfig, batch_stream

            try:
                batches = batch_stream(records, BatchingConfig(mode="fixed-size", size=req.engine.batch_size))
                run = synth.run_stream(batches, req.engine.params.to_params())
                extra_views["engine"] = reports.model_view(run.model)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc

        try:
            rows = baselines.compare_report(
                points,
                labels=labels,
                methods=req.methods,
                k=req.k,
                seed=req.seed,
                bandwidth=req.bandwidth,
                coverage_labels=req.coverage_labels,
                extra_views=extra_views,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return EvalResponse(
            rows=reports.compare_rows_json(rows),
            text=reports.render_compare_text(rows, req.coverage_labels),
        )

    return app


app = create_app()
