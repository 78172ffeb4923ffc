"""Answer-side machinery: system prompts and the response stream grammar.

The provider writes plain text with two inline marker forms:

  citation   [[cite:<doc_id>:<block_id>(,<block_id>)*]]
  figure     <figure><img src="block://<doc_id>/<block_id>"><figcaption>CAPTION</figcaption></figure>

Both grammars are canonical and bit-exact: doc ids match [A-Za-z0-9_.-]+,
block ids are decimal integers without leading zeros, and the figure markup
allows no attributes or whitespace beyond what is shown (CAPTION is any text
not containing "</figcaption>").  transform_stream() turns a token stream
into StreamEvents, buffering enough that a marker split across tokens is
never emitted as text.  Text that merely resembles a marker, and markers
whose blocks do not resolve against the index, degrade to plain text: the
stream never crashes on provider output.

Re-serializing the emitted events reproduces the raw text byte-for-byte,
except that texdoc mode strips figure markup entirely (and logs a warning).
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import TYPE_CHECKING, Iterable, Iterator, Union

from .blocks import BlockKind
from .errors import ValidationError

if TYPE_CHECKING:
    from .index import DocumentIndex

LOGGER = logging.getLogger(__name__)


class AgentMode(str, Enum):
    MUDOC = "mudoc"
    TEXDOC = "texdoc"


# -- stream events ----------------------------------------------------------------


@dataclass(frozen=True)
class CitationRef:
    doc_id: str
    block_ids: tuple[int, ...]


@dataclass(frozen=True)
class FigureRef:
    doc_id: str
    block_id: int
    caption_text: str


@dataclass(frozen=True)
class TextDelta:
    text: str


@dataclass(frozen=True)
class Citation:
    ref: CitationRef


@dataclass(frozen=True)
class Figure:
    ref: FigureRef


@dataclass(frozen=True)
class Status:
    phase: str  # "reasoning" | "searching" | "generating"


@dataclass(frozen=True)
class TraceAvailable:
    iteration: int
    trace: object | None = None  # ReasoningTrace; kept off the wire, fetched on demand


@dataclass(frozen=True)
class ErrorEvent:
    message: str


@dataclass(frozen=True)
class Done:
    pass


StreamEvent = Union[TextDelta, Citation, Figure, Status, TraceAvailable, ErrorEvent, Done]


# -- system prompt ------------------------------------------------------------------

_PROMPT_ORDER = {
    AgentMode.MUDOC: ("pedagogy.md", "visuals.md", "safety.md", "citation.md", "figures.md"),
    AgentMode.TEXDOC: ("pedagogy.md", "safety.md", "citation.md"),
}


def _asset(name: str) -> str:
    return resources.files("mudoc.prompts").joinpath(name).read_text(encoding="utf-8")


def prompt_version() -> str:
    return _asset("VERSION").strip()


def build_system_prompt(mode: AgentMode) -> str:
    """Assemble the system prompt for a mode from the versioned text assets.

    texdoc omits every image-related section; the output is deterministic
    for a given asset version, so its hash can be pinned in telemetry.
    """
    mode = AgentMode(mode)
    sections = [_asset(name).strip() for name in _PROMPT_ORDER[mode]]
    header = f"[prompt-version {prompt_version()}]"
    return "\n\n".join([header] + sections) + "\n"


def prompt_fingerprint(mode: AgentMode) -> str:
    return hashlib.sha256(build_system_prompt(mode).encode("utf-8")).hexdigest()


# -- marker grammar ------------------------------------------------------------------

_ID = r"(?:0|[1-9][0-9]*)"
_DOC = r"[A-Za-z0-9_.-]+"

CITE_OPEN = "[[cite:"
CITE_CLOSE = "]]"
FIGURE_OPEN = "<figure>"
FIGURE_CLOSE = "</figure>"

_CITE_RE = re.compile(rf"^\[\[cite:({_DOC}):({_ID}(?:,{_ID})*)\]\]$")
_FIGURE_RE = re.compile(
    rf'^<figure><img src="block://({_DOC})/({_ID})"><figcaption>(.*)</figcaption></figure>$',
    re.DOTALL,
)

# A marker still open past this many characters is treated as stray text.
_MAX_MARKER_CHARS = 8192


def serialize_citation(ref: CitationRef) -> str:
    return f"[[cite:{ref.doc_id}:{','.join(str(b) for b in ref.block_ids)}]]"


def serialize_figure(ref: FigureRef) -> str:
    return (
        f'<figure><img src="block://{ref.doc_id}/{ref.block_id}">'
        f"<figcaption>{ref.caption_text}</figcaption></figure>"
    )


def serialize_events(events: Iterable[StreamEvent]) -> str:
    """Canonical text for a stream: deltas verbatim, markers re-serialized.
    Control events (Status, TraceAvailable, Error, Done) contribute nothing."""
    parts: list[str] = []
    for event in events:
        if isinstance(event, TextDelta):
            parts.append(event.text)
        elif isinstance(event, Citation):
            parts.append(serialize_citation(event.ref))
        elif isinstance(event, Figure):
            parts.append(serialize_figure(event.ref))
    return "".join(parts)


class StreamTransformer:
    """Incremental token-stream to event-stream transducer.

    feed() accepts one raw token and yields any events that became
    unambiguous; flush() drains whatever remains at end of stream.  The
    transformer holds back the shortest suffix that could still grow into a
    marker, so a TextDelta never contains the prefix of a marker that later
    completes.
    """

    def __init__(self, mode: AgentMode, index: "DocumentIndex | None" = None) -> None:
        self.mode = AgentMode(mode)
        self.index = index
        self._buffer = ""

    def feed(self, token: str) -> list[StreamEvent]:
        self._buffer += token
        return self._drain(final=False)

    def flush(self) -> list[StreamEvent]:
        return self._drain(final=True)

    # -- internals ---------------------------------------------------------

    def _drain(self, final: bool) -> list[StreamEvent]:
        events: list[StreamEvent] = []
        out_text: list[str] = []

        def emit_text(piece: str) -> None:
            if piece:
                out_text.append(piece)

        def close_text() -> None:
            if out_text:
                events.append(TextDelta("".join(out_text)))
                out_text.clear()

        while self._buffer:
            cite_at = self._buffer.find(CITE_OPEN)
            fig_at = self._buffer.find(FIGURE_OPEN)
            starts = [(p, kind) for p, kind in ((cite_at, "cite"), (fig_at, "figure")) if p >= 0]
            if not starts:
                held = 0 if final else self._partial_suffix()
                cut = len(self._buffer) - held
                emit_text(self._buffer[:cut])
                self._buffer = self._buffer[cut:]
                break

            pos, kind = min(starts)
            emit_text(self._buffer[:pos])
            self._buffer = self._buffer[pos:]

            closer = CITE_CLOSE if kind == "cite" else FIGURE_CLOSE
            end = self._buffer.find(closer)
            if end < 0:
                if not final and len(self._buffer) <= _MAX_MARKER_CHARS:
                    break  # wait for more tokens
                # Stray opener: release one character and rescan.
                emit_text(self._buffer[0])
                self._buffer = self._buffer[1:]
                continue

            candidate = self._buffer[: end + len(closer)]
            event = self._match(kind, candidate)
            if event is None:
                emit_text(self._buffer[0])
                self._buffer = self._buffer[1:]
                continue
            self._buffer = self._buffer[len(candidate) :]
            if event == "strip":
                continue
            close_text()
            events.append(event)

        close_text()
        return events

    def _partial_suffix(self) -> int:
        """Length of the longest buffer suffix that is a proper prefix of a
        marker opener; that much must be held back."""
        best = 0
        for opener in (CITE_OPEN, FIGURE_OPEN):
            limit = min(len(opener) - 1, len(self._buffer))
            for length in range(limit, 0, -1):
                if self._buffer.endswith(opener[:length]):
                    best = max(best, length)
                    break
        return best

    def _match(self, kind: str, candidate: str):
        """Validate a complete candidate marker. Returns an event, "strip"
        (texdoc figure), or None when the candidate is not a marker."""
        if kind == "cite":
            match = _CITE_RE.match(candidate)
            if not match:
                return None
            doc_id = match.group(1)
            block_ids = tuple(int(b) for b in match.group(2).split(","))
            if self.index is not None:
                missing = [b for b in block_ids if not self.index.has_block(doc_id, b)]
                if missing:
                    LOGGER.warning("citation %s references unknown blocks %s", candidate, missing)
                    return None
            return Citation(CitationRef(doc_id, block_ids))

        match = _FIGURE_RE.match(candidate)
        if not match:
            return None
        doc_id = match.group(1)
        block_id = int(match.group(2))
        caption = match.group(3)
        if self.mode is AgentMode.TEXDOC:
            LOGGER.warning("stripping figure markup for %s:%s in texdoc mode", doc_id, block_id)
            return "strip"
        if self.index is not None:
            if not self.index.has_block(doc_id, block_id):
                LOGGER.warning("figure markup references unknown block %s:%s", doc_id, block_id)
                return None
            if self.index.get_block(doc_id, block_id).kind is not BlockKind.FIGURE:
                LOGGER.warning("figure markup references non-figure block %s:%s", doc_id, block_id)
                return None
        return Figure(FigureRef(doc_id, block_id, caption))


def transform_stream(
    tokens: Iterable[str],
    mode: AgentMode,
    index: "DocumentIndex | None" = None,
) -> Iterator[StreamEvent]:
    """Transform a raw token stream into content StreamEvents."""
    transformer = StreamTransformer(mode, index)
    for token in tokens:
        yield from transformer.feed(token)
    yield from transformer.flush()


def resolve_citation(ref: CitationRef, index: "DocumentIndex") -> list[dict]:
    """Viewer coordinates for each cited block, in marker order."""
    if not ref.block_ids:
        raise ValidationError("citation with no block ids")
    results = []
    for block_id in ref.block_ids:
        block = index.get_block(ref.doc_id, block_id)
        results.append(
            {
                "doc_id": ref.doc_id,
                "block_id": block_id,
                "page": block.page,
                "bbox": block.bbox.as_list(),
                "kind": block.kind.value,
            }
        )
    return results
