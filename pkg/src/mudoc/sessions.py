"""Study sessions: immutable condition, append-only event log, derived metrics.

The event log is the source of truth.  Metrics are a pure fold over it, so
replaying a persisted log after a process restart reproduces them exactly.
Active time accrues from client heartbeats: the gap between consecutive
beats counts only when it does not exceed the configured maximum, so time
away from the page is not billed as study time.

Each session persists to <data_dir>/sessions/<id>.jsonl (one event per
line) plus a notepad snapshot next to it.  Chat history and reasoning
traces live in memory only; telemetry is what the study needs to survive a
restart.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .blocks import Condition
from .errors import NotFoundError, PayloadTooLargeError, ValidationError

LOGGER = logging.getLogger(__name__)

VALID_TABS = ("objectives", "chat", "document")
_LOGGED_EVENT_TYPES = ("tab_switch", "citation_click")


@dataclass(frozen=True)
class TimingConfig:
    min_minutes: float = 15.0
    max_minutes: float = 25.0
    heartbeat_gap_ms: int = 30_000
    notepad_max_bytes: int = 256 * 1024

    @property
    def min_ms(self) -> int:
        return int(self.min_minutes * 60_000)

    @property
    def max_ms(self) -> int:
        return int(self.max_minutes * 60_000)


@dataclass(frozen=True)
class SessionMetrics:
    time_minutes: float
    query_count: int
    note_edit_count: int
    citation_click_count: int
    textbook_tab_fraction: float


@dataclass
class TurnRecord:
    message: str
    response_text: str
    traces: list = field(default_factory=list)


@dataclass
class Session:
    session_id: str
    condition: Condition
    created_at_ms: int
    events: list[dict] = field(default_factory=list)
    notepad: str = ""
    turns: list[TurnRecord] = field(default_factory=list)
    agent_state: object | None = None
    turn_lock: threading.Lock = field(default_factory=threading.Lock)


def fold_metrics(events: list[dict], *, heartbeat_gap_ms: int = 30_000) -> SessionMetrics:
    """Derive session metrics purely from the event log."""
    active_ms = 0
    last_beat: int | None = None
    queries = notes = clicks = 0
    tab_points: list[tuple[int, str]] = []
    last_at: int | None = None

    for event in events:
        kind = event.get("type")
        at = int(event.get("at_ms", 0))
        last_at = at if last_at is None else max(last_at, at)
        if kind == "heartbeat":
            if last_beat is not None and 0 <= at - last_beat <= heartbeat_gap_ms:
                active_ms += at - last_beat
            last_beat = at
        elif kind in ("chat_query", "search_query"):
            queries += 1
        elif kind == "note_edit":
            notes += 1
        elif kind == "citation_click":
            clicks += 1
        elif kind == "tab_switch":
            tab_points.append((at, str(event.get("tab", ""))))

    doc_ms = 0
    total_ms = 0
    if tab_points and last_at is not None:
        bounds = [at for at, _ in tab_points[1:]] + [last_at]
        for (at, tab), until in zip(tab_points, bounds):
            duration = max(0, until - at)
            total_ms += duration
            if tab == "document":
                doc_ms += duration
    fraction = doc_ms / total_ms if total_ms > 0 else 0.0

    return SessionMetrics(
        time_minutes=active_ms / 60_000.0,
        query_count=queries,
        note_edit_count=notes,
        citation_click_count=clicks,
        textbook_tab_fraction=fraction,
    )


def active_ms_of(events: list[dict], *, heartbeat_gap_ms: int = 30_000) -> int:
    active = 0
    last_beat: int | None = None
    for event in events:
        if event.get("type") != "heartbeat":
            continue
        at = int(event.get("at_ms", 0))
        if last_beat is not None and 0 <= at - last_beat <= heartbeat_gap_ms:
            active += at - last_beat
        last_beat = at
    return active


class SessionStore:
    """In-memory session table with JSONL persistence.

    clock returns seconds; event timestamps are stored in ms.  Constructing
    a store over an existing data_dir reloads every persisted session.
    """

    def __init__(
        self,
        data_dir: str | Path | None = None,
        *,
        timing: TimingConfig | None = None,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self.timing = timing or TimingConfig()
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._dir: Path | None = None
        if data_dir is not None:
            self._dir = Path(data_dir) / "sessions"
            self._dir.mkdir(parents=True, exist_ok=True)
            self._reload()

    # -- lifecycle -----------------------------------------------------------

    def create(self, condition: str | Condition) -> Session:
        try:
            cond = Condition(condition)
        except ValueError:
            raise ValidationError(f"unknown condition {condition!r}") from None
        session = Session(
            session_id=uuid.uuid4().hex,
            condition=cond,
            created_at_ms=self._now_ms(),
        )
        with self._lock:
            self._sessions[session.session_id] = session
        self.append_event(
            session,
            "session_created",
            {"session_id": session.session_id, "condition": cond.value},
        )
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id}")
        return session

    # -- events ---------------------------------------------------------------

    def append_event(self, session: Session, kind: str, payload: dict | None = None) -> dict:
        event = {"type": kind, "at_ms": self._now_ms()}
        if payload:
            event.update(payload)
        session.events.append(event)
        self._persist_event(session, event)
        return event

    def log_client_event(self, session: Session, kind: str, payload: dict) -> dict:
        if kind not in _LOGGED_EVENT_TYPES:
            raise ValidationError(f"unknown client event type {kind!r}")
        if kind == "tab_switch":
            tab = payload.get("tab")
            if tab not in VALID_TABS:
                raise ValidationError(f"unknown tab {tab!r}")
            return self.append_event(session, kind, {"tab": tab})
        return self.append_event(session, kind, {k: v for k, v in payload.items() if k in ("doc_id", "block_ids")})

    def heartbeat(self, session: Session) -> int:
        self.append_event(session, "heartbeat")
        return self.active_ms(session)

    # -- notepad ---------------------------------------------------------------

    def update_notes(self, session: Session, text: str) -> int:
        if len(text.encode("utf-8")) > self.timing.notepad_max_bytes:
            raise PayloadTooLargeError(
                f"notepad exceeds {self.timing.notepad_max_bytes} bytes"
            )
        session.notepad = text
        self.append_event(session, "note_edit", {"chars": len(text)})
        self._persist_notepad(session)
        return sum(1 for e in session.events if e["type"] == "note_edit")

    # -- derived views ------------------------------------------------------------

    def metrics(self, session: Session) -> SessionMetrics:
        return fold_metrics(session.events, heartbeat_gap_ms=self.timing.heartbeat_gap_ms)

    def active_ms(self, session: Session) -> int:
        return active_ms_of(session.events, heartbeat_gap_ms=self.timing.heartbeat_gap_ms)

    def timing_state(self, session: Session) -> dict:
        active = self.active_ms(session)
        return {
            "active_ms": active,
            "min_ms": self.timing.min_ms,
            "max_ms": self.timing.max_ms,
            "can_advance": active >= self.timing.min_ms,
            "must_advance": active >= self.timing.max_ms,
        }

    # -- persistence -----------------------------------------------------------------

    def _now_ms(self) -> int:
        return int(self.clock() * 1000)

    def _event_path(self, session_id: str) -> Path | None:
        return self._dir / f"{session_id}.jsonl" if self._dir else None

    def _notepad_path(self, session_id: str) -> Path | None:
        return self._dir / f"{session_id}.notepad.txt" if self._dir else None

    def _persist_event(self, session: Session, event: dict) -> None:
        path = self._event_path(session.session_id)
        if path is None:
            return
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False) + "\n")

    def _persist_notepad(self, session: Session) -> None:
        path = self._notepad_path(session.session_id)
        if path is not None:
            path.write_text(session.notepad, encoding="utf-8")

    def _reload(self) -> None:
        assert self._dir is not None
        for path in sorted(self._dir.glob("*.jsonl")):
            events = []
            with path.open(encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        events.append(json.loads(line))
            if not events or events[0].get("type") != "session_created":
                LOGGER.warning("skipping malformed session log %s", path.name)
                continue
            first = events[0]
            try:
                condition = Condition(first.get("condition"))
            except ValueError:
                LOGGER.warning("skipping session log %s with bad condition", path.name)
                continue
            session = Session(
                session_id=first.get("session_id", path.stem),
                condition=condition,
                created_at_ms=int(first.get("at_ms", 0)),
                events=events,
            )
            notepad_path = self._notepad_path(session.session_id)
            if notepad_path is not None and notepad_path.is_file():
                session.notepad = notepad_path.read_text(encoding="utf-8")
            with self._lock:
                self._sessions[session.session_id] = session
