"""HTTP API for corpus browsing and interactive storyline extraction.

The server holds one immutable corpus plus a coherence-graph cache keyed
by ``(space, itf)``; extraction history is appended in memory and lost on
shutdown.  Every error body is ``{code, message, detail}``: 400 for bad
input, 404 for missing resources, 422 for infeasible extractions, 500 for
internal faults (including the explicit ``no-corpus`` case when the app
was started without data).
"""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from .coherence import CoherenceGraph, apply_itf_weighting, build_graph
from .config import KNOWN_SPACES, RunConfig
from .corpus import CorpusManifest
from .errors import (ConfigError, InfeasibleExtractionError, NarrexError,
                     SolverTimeoutError)
from .evaluate import dtw
from .extract import ExtractionParams, check_feasibility, extract_map


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail if detail is not None else {}


class ExtractionRequest(BaseModel):
    source_id: str
    target_id: str
    K: int = Field(default=5)
    mincover: float = Field(default=0.2)
    space_name: str = Field(default="high")
    itf: bool = Field(default=False)


class EvaluateRequest(BaseModel):
    timeline: list[str]
    baseline: list[str]
    space: str = Field(default="high")


class _State:
    """Shared per-app state: immutable corpus + config, locked caches."""

    def __init__(self, corpus: CorpusManifest | None, cfg: RunConfig,
                 corpus_root: Path | None):
        self.corpus = corpus
        self.cfg = cfg
        self.corpus_root = corpus_root
        self.graphs: dict[tuple[str, bool], CoherenceGraph] = {}
        self.history: list[dict] = []
        self._graph_lock = threading.Lock()
        self._history_lock = threading.Lock()

    def require_corpus(self) -> CorpusManifest:
        if self.corpus is None:
            raise ApiError(500, "no-corpus", "no corpus is loaded")
        return self.corpus

    def graph_for(self, space: str, itf: bool) -> CoherenceGraph:
        corpus = self.require_corpus()
        if space not in KNOWN_SPACES:
            raise ApiError(400, "validation",
                           f"unknown space {space!r}; expected one of {list(KNOWN_SPACES)}")
        if space not in corpus.embeddings:
            raise ApiError(400, "validation", f"corpus has no {space!r} embedding space")
        if corpus.cluster_matrix is None:
            raise ApiError(500, "no-clusters",
                           "corpus has no cluster distributions; run propagation first")
        key = (space, itf)
        with self._graph_lock:
            if key not in self.graphs:
                cfg = self.cfg
                g = build_graph(corpus, corpus.embeddings[space], corpus.cluster_matrix,
                                window=cfg.window, top_k_out=cfg.top_k_out,
                                mode=cfg.coherence_mode)
                if itf:
                    g = apply_itf_weighting(g, corpus)
                self.graphs[key] = g
            return self.graphs[key]

    def record_extraction(self, entry: dict) -> None:
        with self._history_lock:
            self.history.append(entry)


def _row_for(corpus: CorpusManifest, record_id: str, role: str) -> int:
    try:
        return corpus.row_of(record_id)
    except KeyError:
        raise ApiError(400, "validation", f"unknown {role} id {record_id!r}") from None


def create_app(corpus: CorpusManifest | None = None,
               cfg: RunConfig | None = None,
               corpus_root: str | Path | None = None) -> FastAPI:
    cfg = cfg or RunConfig()
    state = _State(corpus, cfg, Path(corpus_root) if corpus_root else None)
    app = FastAPI(title="narrex", docs_url=None, redoc_url=None)
    app.state.narrex = state
    app.add_middleware(
        CORSMiddleware, allow_origins=[cfg.cors_origin],
        allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={
            "code": exc.code, "message": exc.message,
            "detail": jsonable_encoder(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "validation", "message": "invalid request body",
            "detail": jsonable_encoder(exc.errors(), custom_encoder={bytes: repr})})

    @app.exception_handler(NarrexError)
    async def _domain_error(request: Request, exc: NarrexError):
        return JSONResponse(status_code=400, content={
            "code": "validation", "message": str(exc), "detail": {}})

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={
            "code": "internal", "message": f"{type(exc).__name__}: {exc}", "detail": {}})

    @app.get("/api/images")
    def list_images(page: int = 1, page_size: int = 50,
                    category: str | None = None, location: str | None = None):
        corpus = state.require_corpus()
        if page < 1 or page_size < 1:
            raise ApiError(400, "validation", "page and page_size must be >= 1")
        rows = [
            r for r in corpus.records
            if (category is None or r.effective_category == category)
            and (location is None or r.location_tag == location)
        ]
        start = (page - 1) * page_size
        return {
            "page": page,
            "page_size": page_size,
            "total": len(rows),
            "records": [
                {
                    "id": r.id,
                    "date": r.effective_date.isoformat() if r.effective_date else None,
                    "category": r.effective_category,
                    "location": r.location_tag,
                    "expert_labeled": r.expert_category is not None,
                    "thumbnail": f"/api/images/{r.id}/file" if r.file_ref else None,
                }
                for r in rows[start:start + page_size]
            ],
        }

    @app.get("/api/images/{record_id}/file")
    def image_file(record_id: str):
        corpus = state.require_corpus()
        row = _row_for(corpus, record_id, "record")
        rec = corpus.records[row]
        if rec.file_ref is None:
            raise ApiError(404, "not-found", f"record {record_id!r} has no image file")
        if state.corpus_root is None:
            raise ApiError(404, "not-found", "server has no corpus root for image files")
        path = state.corpus_root / rec.file_ref
        if not path.is_file():
            raise ApiError(404, "not-found", f"image file {rec.file_ref!r} does not exist")
        return FileResponse(path)

    @app.get("/api/clusters")
    def clusters():
        corpus = state.require_corpus()
        if corpus.cluster_matrix is None:
            raise ApiError(500, "no-clusters",
                           "corpus has no cluster distributions; run propagation first")
        counts = {c: 0 for c in corpus.categories}
        for r in corpus.records:
            if r.effective_category is not None:
                counts[r.effective_category] += 1
        f = corpus.cluster_matrix
        images = [
            {
                "id": r.id,
                "top_category": corpus.categories[int(f[i].argmax())],
                "top_probability": float(f[i].max()),
            }
            for i, r in enumerate(corpus.records)
        ]
        return {"categories": corpus.categories, "counts": counts, "images": images}

    @app.get("/api/graph")
    def graph(space: str = "high", itf: bool = False):
        corpus = state.require_corpus()
        return state.graph_for(space, itf).to_json(corpus)

    def _params_from(req: ExtractionRequest) -> ExtractionParams:
        params = ExtractionParams(
            source_id=req.source_id, target_id=req.target_id, K=req.K,
            mincover=req.mincover, space_name=req.space_name, itf=req.itf)
        try:
            params.validate()
        except ConfigError as exc:
            raise ApiError(400, "validation", str(exc)) from exc
        return params

    @app.post("/api/extract")
    def extract(req: ExtractionRequest):
        corpus = state.require_corpus()
        for role, rid in (("source", req.source_id), ("target", req.target_id)):
            _row_for(corpus, rid, role)
        params = _params_from(req)
        g = state.graph_for(req.space_name, req.itf)
        try:
            narrative = extract_map(g, corpus, params, time_limit=state.cfg.timeout)
        except InfeasibleExtractionError as exc:
            raise ApiError(422, "infeasible", str(exc), exc.report) from exc
        except SolverTimeoutError as exc:
            raise ApiError(500, "timeout", str(exc),
                           {"incumbent": exc.incumbent}) from exc
        doc = narrative.to_json()
        state.record_extraction({
            "params": params.to_json(),
            "route": narrative.main_route,
            "mu_star": narrative.mu_star,
            "covered_clusters": narrative.covered_clusters,
        })
        return doc

    @app.post("/api/feasibility")
    def feasibility(req: ExtractionRequest):
        corpus = state.require_corpus()
        for role, rid in (("source", req.source_id), ("target", req.target_id)):
            _row_for(corpus, rid, role)
        params = _params_from(req)
        g = state.graph_for(req.space_name, req.itf)
        return check_feasibility(g, corpus, params).to_json()

    @app.post("/api/evaluate")
    def evaluate(req: EvaluateRequest):
        corpus = state.require_corpus()
        if req.space not in corpus.embeddings:
            raise ApiError(400, "validation", f"corpus has no {req.space!r} embedding space")
        if len(req.timeline) < 2 or len(req.baseline) < 2:
            raise ApiError(400, "validation",
                           "timeline and baseline need at least 2 ids each")
        emb = corpus.embeddings[req.space].data
        a = emb[[_row_for(corpus, rid, "timeline") for rid in req.timeline]]
        b = emb[[_row_for(corpus, rid, "baseline") for rid in req.baseline]]
        return dtw(a, b).to_json()

    @app.get("/api/history")
    def history():
        with state._history_lock:
            return {"extractions": list(state.history)}

    return app
