"""HTTP surface of the session service.

Endpoints mirror the facilitator workflow: create a session, feed it
transcript segments, generate stakeholder personas, reveal a persona's
reflection, stage a question, and curate the question list. A text/event-
stream endpoint pushes session events to live UIs. Errors are uniform
{code, message, details} bodies.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import __version__
from .domain import StakeholderQuestion, ValidationError, resolve_expert
from .gateway import (
    CompletionTimeout,
    GatewayError,
    ProviderError,
    ScriptExhausted,
    StructuredOutputFailed,
    TransportError,
)
from .prompts import MissingBinding
from .service import (
    BadContext,
    ReflectionMissing,
    SessionService,
    UnknownPersona,
    UnknownSession,
)
from .transcript import EmptyText


class ExpertIn(BaseModel):
    name: str
    expertise: str = ""


class CreateSessionRequest(BaseModel):
    theme: str
    experts: list[ExpertIn] = Field(default_factory=list)
    setting_note: str = ""


class AppendSegmentRequest(BaseModel):
    speaker: str
    text: str
    timestamp: Optional[float] = None


class AcceptQuestionRequest(BaseModel):
    question: str
    explanation: str = ""
    expert: str = ""
    persona_id: Optional[str] = None
    expert_resolved: Optional[bool] = None


def _error_body(code: str, message: str, details: Any = None) -> dict[str, Any]:
    return {"code": code, "message": message, "details": details}


def _error_response(status: int, code: str, message: str, details: Any = None) -> JSONResponse:
    return JSONResponse(status_code=status, content=_error_body(code, message, details))


def create_app(service: SessionService, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="missingvoices", version=__version__)
    app.state.service = service
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(UnknownSession)
    async def _unknown_session(request: Request, exc: UnknownSession):
        return _error_response(404, "UnknownSession", str(exc), {"session_id": exc.session_id})

    @app.exception_handler(UnknownPersona)
    async def _unknown_persona(request: Request, exc: UnknownPersona):
        return _error_response(404, "UnknownPersona", str(exc), {"persona_id": exc.persona_id})

    @app.exception_handler(ReflectionMissing)
    async def _reflection_missing(request: Request, exc: ReflectionMissing):
        return _error_response(409, "ReflectionMissing", str(exc), {"persona_id": exc.persona_id})

    @app.exception_handler(BadContext)
    async def _bad_context(request: Request, exc: BadContext):
        return _error_response(
            400, "BadContext", str(exc), {"paths": exc.error.paths}
        )

    @app.exception_handler(EmptyText)
    async def _empty_text(request: Request, exc: EmptyText):
        return _error_response(400, "EmptyText", "segment text is empty")

    @app.exception_handler(MissingBinding)
    async def _missing_binding(request: Request, exc: MissingBinding):
        return _error_response(409, "MissingBinding", str(exc), {"binding": exc.name})

    @app.exception_handler(ValidationError)
    async def _validation_error(request: Request, exc: ValidationError):
        return _error_response(400, "ValidationError", str(exc), {"paths": exc.paths})

    @app.exception_handler(StructuredOutputFailed)
    async def _structured_failed(request: Request, exc: StructuredOutputFailed):
        return _error_response(
            502,
            "StructuredOutputFailed",
            str(exc),
            {"attempts": exc.attempts, "last_error": str(exc.last_error)},
        )

    @app.exception_handler(GatewayError)
    async def _gateway_error(request: Request, exc: GatewayError):
        codes = {
            CompletionTimeout: "Timeout",
            TransportError: "TransportError",
            ProviderError: "ProviderError",
            ScriptExhausted: "ScriptExhausted",
        }
        return _error_response(502, codes.get(type(exc), "GatewayError"), str(exc))

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict[str, str]:
        session_id = service.create_session(body.model_dump())
        return {"session_id": session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return service.state_dict(session_id)

    @app.post("/sessions/{session_id}/transcript")
    def append_segment(session_id: str, body: AppendSegmentRequest) -> dict[str, int]:
        seq = service.append_segment(session_id, body.speaker, body.text, body.timestamp)
        return {"seq": seq}

    @app.get("/sessions/{session_id}/transcript")
    def get_transcript(session_id: str, format: str = "json"):
        state = service.get_state(session_id)
        if format == "jsonl":
            return PlainTextResponse(
                state.transcript.to_jsonl(), media_type="application/jsonl"
            )
        return {"segments": state.transcript.to_dicts()}

    @app.post("/sessions/{session_id}/stakeholders")
    def generate_stakeholders(session_id: str) -> dict[str, Any]:
        return {"stakeholders": service.generate_stakeholders(session_id)}

    @app.post("/sessions/{session_id}/stakeholders/{persona_id}/reflection")
    def generate_reflection(session_id: str, persona_id: str) -> dict[str, Any]:
        return service.generate_reflection(session_id, persona_id).to_dict()

    @app.post("/sessions/{session_id}/stakeholders/{persona_id}/question")
    def generate_question(session_id: str, persona_id: str) -> dict[str, Any]:
        return service.generate_question(session_id, persona_id).to_dict()

    @app.post("/sessions/{session_id}/questions")
    def accept_question(session_id: str, body: AcceptQuestionRequest) -> dict[str, Any]:
        state = service.get_state(session_id)
        if body.expert_resolved is None:
            expert, resolved = resolve_expert(body.expert, state.context) if body.expert else ("", False)
        else:
            expert, resolved = body.expert, body.expert_resolved
        question = StakeholderQuestion(
            persona_id=body.persona_id,
            question=body.question,
            explanation=body.explanation,
            expert=expert,
            expert_resolved=resolved,
        )
        question_list, duplicate = service.accept_question(session_id, question)
        return {
            "question_list": [q.to_dict() for q in question_list],
            "duplicate": duplicate,
        }

    @app.get("/sessions/{session_id}/events")
    def events(session_id: str) -> StreamingResponse:
        service.get_state(session_id)  # 404 before the stream starts

        def stream():
            # Runs in a worker thread; poll timeouts become SSE comments so
            # dead connections are noticed and the thread is released.
            for event in service.events(session_id, poll_timeout=1.0):
                if event is None:
                    yield ": keepalive\n\n"
                    continue
                payload = json.dumps(event.to_dict())
                yield f"id: {event.seq}\nevent: {event.kind}\ndata: {payload}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if ui_dir is not None and ui_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
