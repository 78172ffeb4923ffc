"""Study service: session engine plus the HTTP/SSE wrapper around it.

StudyService is framework-free and holds all behavior (condition gating,
busy enforcement, telemetry, trace capture); create_app() wraps it in a
FastAPI app that speaks JSON and server-sent events.  Chat streams use one
SSE message per StreamEvent with the event field naming the variant.

A turn commits (history, turn record, response log entry) only when its
stream runs to Done; a client that disconnects mid-stream aborts the turn
and the agent history rolls back to its pre-turn value.
"""

from __future__ import annotations

import base64
import json
import logging
import time
from dataclasses import asdict
from typing import Callable, Iterator

from pydantic import BaseModel

from .agent import AgentState, run_turn
from .blocks import BlockKind, Condition
from .docsearch import NavigationResult, doc_search
from .errors import (
    BusyError,
    ConditionError,
    GatewayError,
    MudocError,
    NotFoundError,
    PayloadTooLargeError,
    ProtocolError,
    ValidationError,
)
from .generation import (
    AgentMode,
    Citation,
    Done,
    ErrorEvent,
    Figure,
    Status,
    StreamEvent,
    TextDelta,
    TraceAvailable,
    serialize_events,
)
from .index import DocumentIndex
from .retrieval import HybridRetriever, RetrievalConfig
from .sessions import Session, SessionStore, TimingConfig, TurnRecord

LOGGER = logging.getLogger(__name__)

_CHAT_CONDITIONS = (Condition.MUDOC, Condition.TEXDOC)


class StudyService:
    def __init__(
        self,
        index: DocumentIndex,
        gateway,
        *,
        retrieval_config: RetrievalConfig | None = None,
        timing: TimingConfig | None = None,
        data_dir: str | None = None,
        clock: Callable[[], float] = time.time,
        max_iterations: int | None = None,
    ) -> None:
        self.index = index
        self.gateway = gateway
        self.retrieval_config = retrieval_config or RetrievalConfig()
        self.retrieval_config.validate()
        self.retriever = HybridRetriever(index, gateway, self.retrieval_config)
        self.store = SessionStore(data_dir, timing=timing, clock=clock)
        self.max_iterations = max_iterations

    # -- sessions ------------------------------------------------------------

    def create_session(self, condition: str) -> Session:
        session = self.store.create(condition)
        if session.condition in _CHAT_CONDITIONS:
            kwargs = {"mode": AgentMode(session.condition.value)}
            if self.max_iterations is not None:
                kwargs["max_iterations"] = self.max_iterations
            session.agent_state = AgentState(**kwargs)
        return session

    def get_session(self, session_id: str) -> Session:
        return self.store.get(session_id)

    # -- chat ------------------------------------------------------------------

    def chat_stream(self, session_id: str, message: str) -> Iterator[StreamEvent]:
        """Start a turn and return its event stream.

        The busy lock is taken and the query logged before the generator is
        returned; the lock releases when the stream finishes or is closed.
        """
        session = self.store.get(session_id)
        if session.condition not in _CHAT_CONDITIONS:
            raise ConditionError(f"chat is not available in the {session.condition.value} condition")
        if not message or not message.strip():
            raise ValidationError("message must not be empty")
        if not session.turn_lock.acquire(blocking=False):
            raise BusyError("a turn is already in flight for this session")
        self.store.append_event(session, "chat_query", {"chars": len(message)})

        def stream() -> Iterator[StreamEvent]:
            completed = False
            failed = False
            traces: list = []
            content_events: list[StreamEvent] = []
            try:
                for event in run_turn(
                    session.agent_state, message, self.gateway, self.retriever, self.index
                ):
                    if isinstance(event, TraceAvailable):
                        traces.append(event.trace)
                    elif isinstance(event, (TextDelta, Citation, Figure)):
                        content_events.append(event)
                    elif isinstance(event, Done):
                        completed = True
                    elif isinstance(event, ErrorEvent):
                        failed = True
                    yield event
            finally:
                if completed:
                    response_text = serialize_events(content_events)
                    session.turns.append(TurnRecord(message, response_text, traces))
                    self.store.append_event(
                        session,
                        "chat_response",
                        {
                            "turn": len(session.turns),
                            "chars": len(response_text),
                            "citations": sum(1 for e in content_events if isinstance(e, Citation)),
                            "figures": sum(1 for e in content_events if isinstance(e, Figure)),
                        },
                    )
                else:
                    reason = "error" if failed else "disconnect"
                    self.store.append_event(session, "turn_aborted", {"reason": reason})
                session.turn_lock.release()

        return stream()

    # -- search -----------------------------------------------------------------

    def search(self, session_id: str, query: str) -> list[NavigationResult]:
        session = self.store.get(session_id)
        if session.condition is not Condition.DOCSEARCH:
            raise ConditionError(
                f"search is not available in the {session.condition.value} condition"
            )
        if not query or not query.strip():
            raise ValidationError("search query must not be empty")
        self.store.append_event(session, "search_query", {"chars": len(query)})
        return doc_search(query, self.index, self.gateway, self.retrieval_config)

    # -- telemetry ----------------------------------------------------------------

    def update_notes(self, session_id: str, text: str) -> int:
        return self.store.update_notes(self.store.get(session_id), text)

    def heartbeat(self, session_id: str) -> int:
        return self.store.heartbeat(self.store.get(session_id))

    def log_client_event(self, session_id: str, kind: str, payload: dict) -> None:
        self.store.log_client_event(self.store.get(session_id), kind, payload)

    def metrics(self, session_id: str) -> dict:
        return asdict(self.store.metrics(self.store.get(session_id)))

    def timing_state(self, session_id: str) -> dict:
        return self.store.timing_state(self.store.get(session_id))

    def get_traces(self, session_id: str, turn: int) -> list[dict]:
        session = self.store.get(session_id)
        if turn < 1 or turn > len(session.turns):
            raise NotFoundError(f"session has no turn {turn}")
        return [asdict(trace) for trace in session.turns[turn - 1].traces]

    def get_notes(self, session_id: str) -> str:
        return self.store.get(session_id).notepad

    # -- document views ---------------------------------------------------------------

    def block_info(self, doc_id: str, block_id: int) -> dict:
        block = self.index.get_block(doc_id, block_id)
        info = {
            "doc_id": doc_id,
            "block_id": block_id,
            "page": block.page,
            "bbox": block.bbox.as_list(),
            "kind": block.kind.value,
        }
        if block.kind is BlockKind.TEXT:
            info["text"] = block.text
        else:
            try:
                record = self.index.get_image_record(doc_id, block_id)
                info["caption"] = record.caption
                info["description"] = record.description
            except NotFoundError:
                pass
            try:
                info["image_b64"] = base64.b64encode(
                    self.index.image_bytes_for(doc_id, block_id)
                ).decode("ascii")
            except NotFoundError:
                pass
        return info

    def page_image_path(self, doc_id: str, page: int):
        if doc_id not in self.index.doc_pages:
            raise NotFoundError(f"unknown document {doc_id}")
        path = self.index.page_image_path(doc_id, page)
        if path is None:
            raise NotFoundError(f"no page image for {doc_id} page {page}")
        return path


# -- SSE helpers ------------------------------------------------------------------


def event_wire_payload(event: StreamEvent) -> tuple[str, dict]:
    """(SSE event name, JSON payload) for one stream event. Reasoning traces
    stay off the wire; clients fetch them on demand."""
    if isinstance(event, TextDelta):
        return "TextDelta", {"text": event.text}
    if isinstance(event, Citation):
        return "Citation", {"doc_id": event.ref.doc_id, "block_ids": list(event.ref.block_ids)}
    if isinstance(event, Figure):
        return "Figure", {
            "doc_id": event.ref.doc_id,
            "block_id": event.ref.block_id,
            "caption": event.ref.caption_text,
        }
    if isinstance(event, Status):
        return "Status", {"phase": event.phase}
    if isinstance(event, TraceAvailable):
        return "TraceAvailable", {"iteration": event.iteration}
    if isinstance(event, ErrorEvent):
        return "Error", {"message": event.message}
    if isinstance(event, Done):
        return "Done", {}
    raise ValidationError(f"unknown stream event {type(event).__name__}")


def format_sse(event: StreamEvent) -> str:
    name, payload = event_wire_payload(event)
    return f"event: {name}\ndata: {json.dumps(payload, ensure_ascii=False)}\n\n"


# -- HTTP app -------------------------------------------------------------------------

# Request bodies live at module scope: endpoint annotations are strings under
# `from __future__ import annotations`, and FastAPI resolves them against the
# module globals, not create_app's locals.


class CreateSessionBody(BaseModel):
    condition: str


class ChatBody(BaseModel):
    message: str


class SearchBody(BaseModel):
    query: str


class NotesBody(BaseModel):
    text: str


class ClientEventBody(BaseModel):
    type: str
    tab: str | None = None
    doc_id: str | None = None
    block_ids: list[int] | None = None


def create_app(service: StudyService):
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse, StreamingResponse

    app = FastAPI(title="mudoc study service")
    app.state.service = service

    status_by_error = [
        (PayloadTooLargeError, 413),
        (BusyError, 409),
        (ConditionError, 409),
        (NotFoundError, 404),
        (ValidationError, 400),
        (ProtocolError, 502),
        (GatewayError, 502),
    ]

    @app.exception_handler(MudocError)
    async def handle_mudoc_error(request: Request, exc: MudocError):
        status = 500
        for err_type, code in status_by_error:
            if isinstance(exc, err_type):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = service.create_session(body.condition)
        return {
            "session_id": session.session_id,
            "condition": session.condition.value,
            "created_at_ms": session.created_at_ms,
        }

    @app.post("/sessions/{session_id}/chat")
    def chat(session_id: str, body: ChatBody):
        events = service.chat_stream(session_id, body.message)

        def sse() -> Iterator[str]:
            for event in events:
                yield format_sse(event)

        return StreamingResponse(sse(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/search")
    def search(session_id: str, body: SearchBody):
        results = service.search(session_id, body.query)
        return {"results": [asdict(r) for r in results]}

    @app.put("/sessions/{session_id}/notes")
    def put_notes(session_id: str, body: NotesBody):
        count = service.update_notes(session_id, body.text)
        return {"note_edit_count": count}

    @app.get("/sessions/{session_id}/notes")
    def get_notes(session_id: str):
        return {"text": service.get_notes(session_id)}

    @app.post("/sessions/{session_id}/heartbeat")
    def heartbeat(session_id: str):
        return {"active_ms": service.heartbeat(session_id)}

    @app.post("/sessions/{session_id}/events")
    def client_event(session_id: str, body: ClientEventBody):
        payload = {k: v for k, v in body.model_dump().items() if k != "type" and v is not None}
        service.log_client_event(session_id, body.type, payload)
        return {"ok": True}

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        return service.metrics(session_id)

    @app.get("/sessions/{session_id}/timing")
    def timing(session_id: str):
        return service.timing_state(session_id)

    @app.get("/sessions/{session_id}/turns/{turn}/trace")
    def traces(session_id: str, turn: int):
        return {"turn": turn, "traces": service.get_traces(session_id, turn)}

    @app.get("/docs/{doc_id}/blocks/{block_id}")
    def block_info(doc_id: str, block_id: int):
        return service.block_info(doc_id, block_id)

    @app.get("/docs/{doc_id}/pages/{page}")
    def page_image(doc_id: str, page: int):
        return FileResponse(service.page_image_path(doc_id, page), media_type="image/png")

    return app
