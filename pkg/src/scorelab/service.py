"""HTTP face of the laboratory: experiments, schema checks, live sessions.

The CLI talks to this app in-process by default (ASGI transport), so the
service is the single entry point for experiment execution; a long-running
deployment gets the same behavior via `scorelab serve`.
"""

from __future__ import annotations

import json
import math
import uuid

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict
from typing import Literal

from .errors import GridError, ParameterError
from .experiments import run_experiment
from .oracle import OracleProfile
from .protocol import QuerySession, open_session, transcript_to_json
from .schemas import ExperimentConfig, SchemaError, validate_csv
from .seeds import derive_seed
from .support import build_support, sample_codebook


class SessionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["hypercube", "product-circle"] = "hypercube"
    d: int = 16
    R: float = 1.0
    gamma: float = 0.25
    regime: Literal["lp", "psi1"] = "lp"
    p: float = 2.0
    eps_err: float = 0.5
    rho: float = 0.2
    q_budget: int = 8
    n: int | None = None  # None opens a null session
    seed: int = 0


class QueryRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma: float
    x: list[float]


class SchemaCheckRequest(BaseModel):
    content: str


def create_app() -> FastAPI:
    app = FastAPI(title="scorelab", version="0.1.0")
    sessions: dict[str, QuerySession] = {}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": "0.1.0"}

    @app.post("/run")
    def run(config: ExperimentConfig) -> dict:
        try:
            return run_experiment(config)
        except (ParameterError, GridError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.post("/schema-check")
    def schema_check(req: SchemaCheckRequest) -> dict:
        try:
            name, rows = validate_csv(req.content)
        except SchemaError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {"schema": name, "rows": rows}

    @app.post("/sessions")
    def open_(req: SessionRequest) -> dict:
        try:
            spec = build_support(req.kind, req.d, req.R, req.gamma)
            profile = OracleProfile(req.regime, req.eps_err, req.rho, req.q_budget, req.p)
            if req.n is None:
                session = open_session(spec, profile, req.seed)
            else:
                book = sample_codebook(spec, req.n, derive_seed(req.seed, "book"))
                session = open_session(book, profile, req.seed)
        except ParameterError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        session_id = uuid.uuid4().hex
        sessions[session_id] = session
        return {"session_id": session_id, "instance": session.transcript.instance}

    def _get(session_id: str) -> QuerySession:
        if session_id not in sessions:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return sessions[session_id]

    @app.post("/sessions/{session_id}/queries")
    def query(session_id: str, req: QueryRequest) -> dict:
        session = _get(session_id)
        try:
            answer = session.query(req.sigma, req.x)
        except ParameterError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {
            "tau": math.hypot(session.spec.gamma, req.sigma),
            "answer": [float(v) for v in answer],
        }

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str) -> dict:
        return json.loads(transcript_to_json(_get(session_id).transcript))

    @app.delete("/sessions/{session_id}")
    def close(session_id: str) -> dict:
        _get(session_id)
        del sessions[session_id]
        return {"closed": session_id}

    return app


app = create_app()
