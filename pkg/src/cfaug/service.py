"""HTTP surface for live annotation sessions.

Endpoints:
  POST /sessions                  {pool, selection, budget} -> {session_id}
  GET  /sessions/{id}/next        head of queue or typed exhausted/empty
  POST /sessions/{id}/labels      {item_id, label} -> ack
  GET  /sessions/{id}/progress    {labeled, budget, state}
  GET  /sessions/{id}/export      labeled items as JSON lines

The ``pool`` field is either a path to an annotation-queue JSONL file
or an inline list of its records.  Errors are structured
{code, message} JSON.  Address and state directory come from
CFAUG_ADDR / CFAUG_STATE_DIR unless overridden by flags.
"""

from __future__ import annotations

import json
import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .annotate import (
    BudgetExhaustedError,
    LabelValidationError,
    SessionItem,
    SessionStore,
    UnknownItemError,
    UnknownSessionError,
)

DEFAULT_ADDR = "127.0.0.1:8787"


class CreateSessionRequest(BaseModel):
    pool: str | list[dict]
    selection: list[str]
    budget: int


class SubmitLabelRequest(BaseModel):
    item_id: str
    label: int


def load_queue_records(records: list[dict]) -> list[SessionItem]:
    return [
        SessionItem(
            id=r["id"],
            origin_id=r["origin_id"],
            type=r["type"],
            text=r["text"],
            tokens=r.get("tokens", []),
            original_text=r["original_text"],
            origin_label=r["origin_label"],
        )
        for r in records
    ]


def load_queue_file(path: str) -> list[SessionItem]:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    return load_queue_records(records)


def create_app(state_dir: str | None = None) -> FastAPI:
    state_dir = state_dir or os.environ.get("CFAUG_STATE_DIR") or ".cfaug-annotate"
    store = SessionStore(state_dir)
    app = FastAPI(title="cfaug annotation service")
    app.state.store = store

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse({"code": code, "message": message}, status_code=status)

    @app.exception_handler(UnknownSessionError)
    async def _unknown_session(request: Request, exc: UnknownSessionError):
        return error(404, "unknown_session", str(exc))

    @app.exception_handler(UnknownItemError)
    async def _unknown_item(request: Request, exc: UnknownItemError):
        return error(404, "unknown_item", str(exc))

    @app.exception_handler(LabelValidationError)
    async def _invalid(request: Request, exc: LabelValidationError):
        return error(400, "validation_error", str(exc))

    @app.exception_handler(BudgetExhaustedError)
    async def _exhausted(request: Request, exc: BudgetExhaustedError):
        return error(409, "budget_exhausted", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _schema(request: Request, exc: RequestValidationError):
        return error(400, "validation_error", str(exc.errors()))

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        if isinstance(req.pool, str):
            if not os.path.exists(req.pool):
                raise UnknownItemError(f"pool file {req.pool!r} not found")
            items = load_queue_file(req.pool)
        else:
            items = load_queue_records(req.pool)
        session = store.create_session(items, req.selection, req.budget)
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str):
        return store.next_item(session_id)

    @app.post("/sessions/{session_id}/labels")
    def submit_label(session_id: str, req: SubmitLabelRequest):
        return store.submit_label(session_id, req.item_id, req.label)

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str):
        return store.progress(session_id)

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str):
        return PlainTextResponse(store.export(session_id), media_type="application/jsonl")

    return app


def serve(addr: str | None = None, state_dir: str | None = None) -> None:
    import uvicorn

    addr = addr or os.environ.get("CFAUG_ADDR") or DEFAULT_ADDR
    host, _, port = addr.partition(":")
    uvicorn.run(create_app(state_dir), host=host or "127.0.0.1", port=int(port or 8787))
