"""Session lifecycle and pipeline orchestration.

One SessionService instance hosts many concurrent sessions. Mutating
operations on a session serialize behind that session's lock (generation
calls can take seconds and must not block other sessions), every completed
mutation is persisted as an atomic JSON snapshot, and subscribers receive
gap-free ordered events from their join point.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

from .domain import (
    AssemblyContext,
    StakeholderPersona,
    StakeholderQuestion,
    StakeholderReflection,
    ValidationError,
    validate_assembly_context,
    validate_question,
    validate_reflection,
    validate_stakeholder_batch,
)
from .gateway import CompletionRequest, Gateway, StructuredOutputFailed
from .prompts import (
    build_question_prompt,
    build_reflection_prompt,
    build_stakeholder_prompt,
)
from .transcript import DEFAULT_WINDOW_CHARS, Transcript

logger = logging.getLogger(__name__)

# Event kinds on the session channel.
SEGMENT_ADDED = "SegmentAdded"
STAKEHOLDERS_READY = "StakeholdersReady"
REFLECTION_READY = "ReflectionReady"
QUESTION_READY = "QuestionReady"
QUESTION_LIST_CHANGED = "QuestionListChanged"
ERROR = "Error"


class UnknownSession(Exception):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"unknown session {session_id!r}")


class UnknownPersona(Exception):
    def __init__(self, persona_id: str):
        self.persona_id = persona_id
        super().__init__(f"unknown persona {persona_id!r}")


class ReflectionMissing(Exception):
    def __init__(self, persona_id: str):
        self.persona_id = persona_id
        super().__init__(f"persona {persona_id!r} has no reflection yet; generate one first")


class BadContext(Exception):
    def __init__(self, error: ValidationError):
        self.error = error
        super().__init__(str(error))


class CorruptSnapshot(Exception):
    pass


@dataclass
class SessionEvent:
    kind: str
    payload: dict[str, Any]
    seq: int

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "payload": self.payload, "seq": self.seq}


@dataclass
class PersonaRecord:
    """A stored persona plus the generation batch it arrived in. Personas
    from earlier batches are superseded but never deleted: facilitators may
    still be browsing their cards."""

    persona: StakeholderPersona
    batch: int

    def to_dict(self, current_batch: int) -> dict[str, Any]:
        entry = self.persona.to_dict()
        entry["batch"] = self.batch
        entry["superseded"] = self.batch < current_batch
        return entry


@dataclass
class SessionState:
    session_id: str
    context: AssemblyContext
    transcript: Transcript = field(default_factory=Transcript)
    personas: list[PersonaRecord] = field(default_factory=list)
    reflections: dict[str, StakeholderReflection] = field(default_factory=dict)
    question_list: list[StakeholderQuestion] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""

    @property
    def current_batch(self) -> int:
        return max((r.batch for r in self.personas), default=0)

    def find_persona(self, persona_id: str) -> Optional[StakeholderPersona]:
        for record in self.personas:
            if record.persona.id == persona_id:
                return record.persona
        return None

    def to_dict(self) -> dict[str, Any]:
        current = self.current_batch
        return {
            "session_id": self.session_id,
            "context": self.context.to_dict(),
            "transcript": self.transcript.to_dicts(),
            "stakeholders": [r.to_dict(current) for r in self.personas],
            "reflections": {pid: r.to_dict() for pid, r in self.reflections.items()},
            "question_list": [q.to_dict() for q in self.question_list],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "SessionState":
        try:
            personas = []
            for entry in raw["stakeholders"]:
                persona = StakeholderPersona(
                    id=entry["id"],
                    name=entry["name"],
                    description=entry["description"],
                    demographics=_demographics_from_dict(entry["demographics"]),
                )
                personas.append(PersonaRecord(persona=persona, batch=int(entry["batch"])))
            return cls(
                session_id=raw["session_id"],
                context=AssemblyContext.from_dict(raw["context"]),
                transcript=Transcript.from_dicts(raw["transcript"]),
                personas=personas,
                reflections={
                    pid: StakeholderReflection.from_dict(r)
                    for pid, r in raw["reflections"].items()
                },
                question_list=[StakeholderQuestion.from_dict(q) for q in raw["question_list"]],
                created_at=raw["created_at"],
                updated_at=raw["updated_at"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptSnapshot(f"snapshot is missing or corrupt: {exc}") from exc


def _demographics_from_dict(raw: dict[str, Any]):
    from .domain import Demographics, PoliticalLeaning, SustainabilityInterest

    return Demographics(
        age=int(raw["age"]),
        gender=raw["gender"],
        income=raw["income"],
        education=raw["education"],
        profession=raw["profession"],
        political_leaning=PoliticalLeaning(raw["political_leaning"]),
        sustainability_interest=SustainabilityInterest(raw["sustainability_interest"]),
    )


class _EventHub:
    """Per-session fan-out. Event seqs are assigned under the hub lock and
    pushed to every subscriber queue in order, so a subscriber never sees a
    gap after its join point."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._next_seq = 1
        self._subscribers: list[queue.Queue] = []

    def emit(self, kind: str, payload: dict[str, Any]) -> SessionEvent:
        with self._lock:
            event = SessionEvent(kind=kind, payload=payload, seq=self._next_seq)
            self._next_seq += 1
            for q in self._subscribers:
                q.put(event)
        return event

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


@dataclass
class _Runtime:
    state: SessionState
    lock: threading.RLock = field(default_factory=threading.RLock)
    hub: _EventHub = field(default_factory=_EventHub)


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class SessionService:
    """Owns all session runtimes, the gateway, and snapshot persistence."""

    def __init__(
        self,
        gateway: Gateway,
        data_dir: Optional[Path] = None,
        *,
        model: str = "gpt-4o",
        temperature: float = 0.7,
        request_timeout: float = 60.0,
        max_retries: int = 2,
        window_chars: int = DEFAULT_WINDOW_CHARS,
        persona_id_factory: Optional[Callable[[], str]] = None,
        session_id_factory: Optional[Callable[[], str]] = None,
        clock: Optional[Callable[[], str]] = None,
    ):
        self.gateway = gateway
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.model = model
        self.temperature = temperature
        self.request_timeout = request_timeout
        self.max_retries = max_retries
        self.window_chars = window_chars
        self._persona_id = persona_id_factory or (lambda: f"p{uuid.uuid4().hex[:8]}")
        self._session_id = session_id_factory or (lambda: uuid.uuid4().hex[:12])
        self._clock = clock or _utc_now_iso
        self._sessions: dict[str, _Runtime] = {}
        self._registry_lock = threading.Lock()
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._load_existing()

    # -- lifecycle ---------------------------------------------------------

    def create_session(self, raw_context: dict[str, Any]) -> str:
        try:
            context = validate_assembly_context(raw_context)
        except ValidationError as exc:
            raise BadContext(exc) from exc
        now = self._clock()
        with self._registry_lock:
            session_id = self._session_id()
            while session_id in self._sessions:
                session_id = self._session_id()
            state = SessionState(
                session_id=session_id, context=context, created_at=now, updated_at=now
            )
            self._sessions[session_id] = _Runtime(state=state)
        self._persist(self._sessions[session_id])
        return session_id

    def session_ids(self) -> list[str]:
        with self._registry_lock:
            return list(self._sessions)

    def get_state(self, session_id: str) -> SessionState:
        return self._runtime(session_id).state

    def state_dict(self, session_id: str) -> dict[str, Any]:
        runtime = self._runtime(session_id)
        with runtime.lock:
            return runtime.state.to_dict()

    def _runtime(self, session_id: str) -> _Runtime:
        with self._registry_lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise UnknownSession(session_id)
        return runtime

    # -- transcript --------------------------------------------------------

    def append_segment(
        self,
        session_id: str,
        speaker: str,
        text: str,
        timestamp: Optional[float] = None,
    ) -> int:
        runtime = self._runtime(session_id)
        with runtime.lock:
            if timestamp is None:
                timestamp = self._elapsed_seconds(runtime.state)
            segment = runtime.state.transcript.append(speaker, text, timestamp)
            runtime.state.updated_at = self._clock()
            self._persist(runtime)
            runtime.hub.emit(SEGMENT_ADDED, {"segment": segment.to_dict()})
            return segment.seq

    def _elapsed_seconds(self, state: SessionState) -> float:
        try:
            created = datetime.fromisoformat(state.created_at)
        except ValueError:
            return 0.0
        return max(0.0, (datetime.now(timezone.utc) - created).total_seconds())

    # -- pipeline ----------------------------------------------------------

    def _request(self, prompt) -> CompletionRequest:
        return CompletionRequest(
            prompt=prompt,
            model=self.model,
            temperature=self.temperature,
            timeout=self.request_timeout,
        )

    def generate_stakeholders(self, session_id: str) -> list[dict[str, Any]]:
        """Generate a fresh batch of 3 personas and append it to the session.

        Regeneration appends (older batches are marked superseded, not
        deleted). On failure the session is unchanged and an Error event is
        emitted before the exception propagates.
        """
        runtime = self._runtime(session_id)
        with runtime.lock:
            state = runtime.state
            window = state.transcript.window(self.window_chars)
            prompt = build_stakeholder_prompt(state.context, window)
            try:
                personas, _ = self.gateway.complete_structured(
                    self._request(prompt), validate_stakeholder_batch, self.max_retries
                )
            except StructuredOutputFailed as exc:
                self._emit_error(runtime, exc)
                raise
            batch = state.current_batch + 1
            for persona in personas:
                persona.id = self._persona_id()
                state.personas.append(PersonaRecord(persona=persona, batch=batch))
            state.updated_at = self._clock()
            self._persist(runtime)
            current = state.current_batch
            payload = [
                r.to_dict(current) for r in state.personas if r.batch == batch
            ]
            runtime.hub.emit(STAKEHOLDERS_READY, {"batch": batch, "stakeholders": payload})
            return payload

    def generate_reflection(self, session_id: str, persona_id: str) -> StakeholderReflection:
        """Generate (or regenerate, overwriting) the persona's reflection."""
        runtime = self._runtime(session_id)
        with runtime.lock:
            state = runtime.state
            persona = state.find_persona(persona_id)
            if persona is None:
                raise UnknownPersona(persona_id)
            window = state.transcript.window(self.window_chars)
            prompt = build_reflection_prompt(persona, state.context, window)
            try:
                reflection, _ = self.gateway.complete_structured(
                    self._request(prompt),
                    lambda raw: validate_reflection(raw, persona_id),
                    self.max_retries,
                )
            except StructuredOutputFailed as exc:
                self._emit_error(runtime, exc)
                raise
            state.reflections[persona_id] = reflection
            state.updated_at = self._clock()
            self._persist(runtime)
            runtime.hub.emit(
                REFLECTION_READY,
                {"persona_id": persona_id, "reflection": reflection.to_dict()},
            )
            return reflection

    def generate_question(self, session_id: str, persona_id: str) -> StakeholderQuestion:
        """Generate a staged question for a persona that already has a
        reflection. The question is returned (and announced) but not added to
        the session question list; the facilitator decides that."""
        runtime = self._runtime(session_id)
        with runtime.lock:
            state = runtime.state
            persona = state.find_persona(persona_id)
            if persona is None:
                raise UnknownPersona(persona_id)
            reflection = state.reflections.get(persona_id)
            if reflection is None:
                raise ReflectionMissing(persona_id)
            window = state.transcript.window(self.window_chars)
            current_questions = [q.question for q in state.question_list]
            prompt = build_question_prompt(
                persona, reflection, state.context, window, current_questions
            )
            try:
                question, _ = self.gateway.complete_structured(
                    self._request(prompt),
                    lambda raw: validate_question(raw, state.context, persona_id),
                    self.max_retries,
                )
            except StructuredOutputFailed as exc:
                self._emit_error(runtime, exc)
                raise
            runtime.hub.emit(
                QUESTION_READY,
                {"persona_id": persona_id, "question": question.to_dict()},
            )
            return question

    def accept_question(
        self, session_id: str, question: StakeholderQuestion
    ) -> tuple[list[StakeholderQuestion], bool]:
        """Append a question (generated or facilitator-authored) to the list.

        A persona_id, when present, must reference an existing persona.
        Exact-text duplicates are allowed but flagged so the UI can warn.
        """
        runtime = self._runtime(session_id)
        with runtime.lock:
            state = runtime.state
            if question.persona_id is not None and state.find_persona(question.persona_id) is None:
                raise UnknownPersona(question.persona_id)
            duplicate = any(q.question == question.question for q in state.question_list)
            state.question_list.append(question)
            state.updated_at = self._clock()
            self._persist(runtime)
            runtime.hub.emit(
                QUESTION_LIST_CHANGED,
                {
                    "question_list": [q.to_dict() for q in state.question_list],
                    "duplicate": duplicate,
                },
            )
            return list(state.question_list), duplicate

    def _emit_error(self, runtime: _Runtime, exc: Exception) -> None:
        runtime.hub.emit(ERROR, {"code": type(exc).__name__, "message": str(exc)})

    # -- events ------------------------------------------------------------

    def subscribe(self, session_id: str) -> tuple[queue.Queue, Callable[[], None]]:
        runtime = self._runtime(session_id)
        q = runtime.hub.subscribe()
        return q, lambda: runtime.hub.unsubscribe(q)

    def events(self, session_id: str, poll_timeout: float = 15.0) -> Iterator[Optional[SessionEvent]]:
        """Yield events forever; yields None on poll timeout so the consumer
        can emit a keepalive and notice disconnects."""
        q, unsubscribe = self.subscribe(session_id)
        try:
            while True:
                try:
                    yield q.get(timeout=poll_timeout)
                except queue.Empty:
                    yield None
        finally:
            unsubscribe()

    # -- persistence -------------------------------------------------------

    def snapshot_path(self, session_id: str) -> Optional[Path]:
        if self.data_dir is None:
            return None
        return self.data_dir / f"{session_id}.json"

    def _persist(self, runtime: _Runtime) -> None:
        path = self.snapshot_path(runtime.state.session_id)
        if path is None:
            return
        write_snapshot(runtime.state, path)

    def persist_all(self) -> None:
        for session_id in self.session_ids():
            runtime = self._runtime(session_id)
            with runtime.lock:
                self._persist(runtime)

    def _load_existing(self) -> None:
        assert self.data_dir is not None
        for path in sorted(self.data_dir.glob("*.json")):
            try:
                state = read_snapshot(path)
            except CorruptSnapshot:
                logger.warning("skipping corrupt snapshot %s", path)
                continue
            self._sessions[state.session_id] = _Runtime(state=state)
            logger.info("restored session %s from %s", state.session_id, path)


def write_snapshot(state: SessionState, path: Path) -> None:
    """Atomically persist one session: write to a temp file, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(state.to_dict(), indent=2) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_snapshot(path: Path) -> SessionState:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"cannot read snapshot {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorruptSnapshot(f"snapshot {path} is not a JSON object")
    return SessionState.from_dict(raw)
