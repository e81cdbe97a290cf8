"""HTTP judgment service: a thin layer over SplitSession.

One annotator session is assumed; judgment writes are serialized with a
lock. Responses are plain JSON; every error body is {"error": string}.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import ParamineError, StateError, ValidationError
from .splitbuilder import (PHASE_DONE, PHASE_TEST, SplitSession, emit_split)


class StateResponse(BaseModel):
    phase: str
    judged: int
    accepted_pairs: int
    volume: int
    ratio: float


class DocProgressBody(BaseModel):
    pair_id: str
    judged: int
    total: int


class NextResponse(BaseModel):
    done: bool = False
    pair_id: Optional[str] = None
    src_index: Optional[int] = None
    tgt_index: Optional[int] = None
    src_text: Optional[str] = None
    tgt_text: Optional[str] = None
    score: Optional[float] = None
    doc_progress: Optional[DocProgressBody] = None


class JudgmentRequest(BaseModel):
    pair_id: str
    src_index: int = Field(ge=0)
    tgt_index: int = Field(ge=0)
    verdict: str
    annotator: str = "anonymous"


class JudgmentResponse(BaseModel):
    ok: bool
    warning: Optional[str] = None
    next: NextResponse


def _next_payload(session: SplitSession) -> NextResponse:
    state = session.state()
    cand = state.next_pair
    if cand is None:
        return NextResponse(done=True)
    progress = state.progress
    return NextResponse(
        done=False, pair_id=cand.pair_id, src_index=cand.src_index,
        tgt_index=cand.tgt_index, src_text=cand.src_text, tgt_text=cand.tgt_text,
        score=cand.score,
        doc_progress=DocProgressBody(pair_id=progress.pair_id,
                                     judged=progress.judged,
                                     total=progress.total),
    )


def create_app(session: SplitSession, out_dir: Optional[Path] = None,
               ui_dir: Optional[Path] = None) -> FastAPI:
    """out_dir, when given, receives the split files the moment the build
    completes; ui_dir, when given, is served at / for the annotation UI."""
    app = FastAPI(title="paramine judgment service", docs_url=None, redoc_url=None)
    lock = threading.Lock()
    emitted = {"done": False}

    @app.exception_handler(RequestValidationError)
    async def bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(ValidationError)
    async def invalid(request: Request, exc: ValidationError):
        return JSONResponse(status_code=404 if "candidate" in str(exc) else 422,
                            content={"error": str(exc)})

    @app.exception_handler(StateError)
    async def conflict(request: Request, exc: StateError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(ParamineError)
    async def failed(request: Request, exc: ParamineError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/state", response_model=StateResponse)
    def get_state():
        state = session.state()
        if state.phase == PHASE_DONE:
            accepted = len(state.accepted_test) + len(state.accepted_dev)
            volume = session.cfg.volume_test + session.cfg.volume_dev
        else:
            accepted = len(state.accepted_for(state.phase))
            volume = session.cfg.volume_for(state.phase)
        return StateResponse(phase=state.phase, judged=state.judged_count,
                             accepted_pairs=accepted, volume=volume,
                             ratio=session.cfg.ratio)

    @app.get("/api/next", response_model=NextResponse,
             response_model_exclude_none=True)
    def get_next():
        return _next_payload(session)

    @app.post("/api/judgment", response_model=JudgmentResponse,
              response_model_exclude_none=True)
    def post_judgment(body: JudgmentRequest):
        with lock:
            _, warning = session.record_judgment(
                pair_id=body.pair_id, src_index=body.src_index,
                tgt_index=body.tgt_index, verdict=body.verdict,
                annotator=body.annotator,
            )
            if out_dir is not None and session.is_complete() and not emitted["done"]:
                emit_split(session, out_dir)
                emitted["done"] = True
            return JudgmentResponse(ok=True, warning=warning,
                                    next=_next_payload(session))

    @app.get("/api/manifest")
    def get_manifest():
        from .splitbuilder import build_manifest

        manifest, _ = build_manifest(session)  # raises StateError if incomplete
        return manifest.to_dict()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(session: SplitSession, addr: str, out_dir: Optional[Path] = None,
          ui_dir: Optional[Path] = None) -> None:
    """Blocking uvicorn run; addr is host:port or just a port."""
    import uvicorn

    host, _, port = addr.rpartition(":")
    if not host:
        host = "127.0.0.1"
    app = create_app(session, out_dir=out_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
