"""HTTP service wrapping a loaded checking pipeline.

Endpoints:
    POST /check   {"claim": str} -> verdict JSON
    GET  /health  -> service status, index size, encoder identity
    GET  /metrics -> request counts and check-latency summaries

The pipeline is immutable after startup; requests share it freely. Errors
use the uniform body ``{"error": str}``.
"""

from __future__ import annotations

import threading
import time

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from factcheck import __version__
from factcheck.pipeline import CheckPipeline, check_claim


class CheckRequest(BaseModel):
    claim: str


class CandidateModel(BaseModel):
    id: str
    similarity: float
    prob: float


class CheckResponse(BaseModel):
    claim: str
    label: str
    p_truth: float | None = None
    tau_b: float
    threshold_t: float
    candidates: list[CandidateModel]
    timings_ms: dict[str, float]
    error: str | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
    index_size: int
    encoder: str
    verifier: str


class LatencyModel(BaseModel):
    median_ms: float
    p95_ms: float
    n: int


class MetricsResponse(BaseModel):
    requests: dict[str, int]
    check_latency: LatencyModel | None = None
    uptime_s: float


class _Metrics:
    """In-memory request counters; shared state behind one lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {}
        self._check_ms: list[float] = []
        self.started_at = time.time()

    def record(self, endpoint: str, elapsed_ms: float | None = None) -> None:
        with self._lock:
            self._counts[endpoint] = self._counts.get(endpoint, 0) + 1
            if elapsed_ms is not None:
                self._check_ms.append(elapsed_ms)

    def snapshot(self) -> MetricsResponse:
        with self._lock:
            counts = dict(self._counts)
            samples = list(self._check_ms)
        latency = None
        if samples:
            arr = np.asarray(samples)
            latency = LatencyModel(
                median_ms=float(np.median(arr)),
                p95_ms=float(np.percentile(arr, 95)),
                n=len(samples),
            )
        return MetricsResponse(
            requests=counts,
            check_latency=latency,
            uptime_s=time.time() - self.started_at,
        )


def create_app(pipeline: CheckPipeline) -> FastAPI:
    """Build the service around an already-loaded pipeline."""
    app = FastAPI(title="factcheck", version=__version__)
    metrics = _Metrics()

    @app.exception_handler(HTTPException)
    async def _http_error(_: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.exception_handler(Exception)
    async def _unhandled_error(_: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/check", response_model=CheckResponse, response_model_exclude_none=True)
    def check(request: CheckRequest):
        if not request.claim.strip():
            raise HTTPException(status_code=400, detail="empty claim")
        started = time.perf_counter()
        verdict = check_claim(pipeline, request.claim)
        metrics.record("check", (time.perf_counter() - started) * 1000.0)
        return CheckResponse(
            claim=verdict.claim,
            label=verdict.label,
            p_truth=verdict.p_truth,
            tau_b=verdict.tau_b,
            threshold_t=verdict.threshold_t,
            candidates=[
                CandidateModel(id=c.explanation_id, similarity=c.similarity, prob=c.probability)
                for c in verdict.candidates
            ],
            timings_ms=verdict.timings_ms,
            error=verdict.error,
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        metrics.record("health")
        return HealthResponse(
            status="ok",
            version=__version__,
            index_size=len(pipeline.index),
            encoder=pipeline.encoder.descriptor.identity,
            verifier=pipeline.verifier.kind,
        )

    @app.get("/metrics", response_model=MetricsResponse)
    def get_metrics():
        metrics.record("metrics")
        return metrics.snapshot()

    return app
