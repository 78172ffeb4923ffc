"""Bounded reason-act loop that plans searches and writes the final answer.

Each iteration asks the provider for exactly one function call carrying
three labeled reflections (query, search content, action choice) plus the
action itself:

    initial_search    broad query; returns up to 3 text spans
    content_search    targeted text/image queries; up to 10 spans + 5 images
    confirm_intent    ask the learner to clarify; ends the turn
    final_response    the answer text; ends the turn

When the iteration cap is reached without a turn-ending action, the
provider is reprompted once more with search disabled and must produce a
final_response.  An unparseable reply earns one corrective reprompt, then
ProtocolError.  In texdoc mode the image half of content_search is removed
from the schema, and any image queries the provider emits anyway are
dropped with a log line rather than an error.

History is committed only when a turn completes; a failed turn leaves the
pre-turn history untouched.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Iterator, Union

from .errors import GatewayError, MudocError, ProtocolError, ValidationError
from .gateway import ChatResult
from .generation import (
    AgentMode,
    Done,
    ErrorEvent,
    Status,
    StreamEvent,
    TraceAvailable,
    build_system_prompt,
    transform_stream,
)
from .retrieval import postprocess_text

if TYPE_CHECKING:
    from .index import DocumentIndex
    from .retrieval import HybridRetriever

LOGGER = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 6
_HISTORY_CHAR_BUDGET = 120_000
_STREAM_CHUNK_CHARS = 24


@dataclass(frozen=True)
class ReasoningTrace:
    query_reflection: str
    search_content_reflection: str
    action_reasoning: str


@dataclass(frozen=True)
class InitialSearch:
    query: str


@dataclass(frozen=True)
class ContentSearch:
    text_queries: tuple[str, ...]
    image_queries: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConfirmIntent:
    question: str


@dataclass(frozen=True)
class FinalResponse:
    content: str


AgentAction = Union[InitialSearch, ContentSearch, ConfirmIntent, FinalResponse]


@dataclass(frozen=True)
class SpanResult:
    doc_id: str
    block_ids: tuple[int, ...]
    text: str


@dataclass(frozen=True)
class ImageResult:
    doc_id: str
    block_id: int
    caption: str
    description: str


@dataclass(frozen=True)
class UserMessage:
    text: str


@dataclass(frozen=True)
class AssistantStep:
    trace: ReasoningTrace
    action: AgentAction


@dataclass(frozen=True)
class ToolResult:
    kind: str
    spans: tuple[SpanResult, ...] = ()
    images: tuple[ImageResult, ...] = ()


HistoryEntry = Union[UserMessage, AssistantStep, ToolResult]


@dataclass
class AgentState:
    mode: AgentMode
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    history: list[HistoryEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.mode = AgentMode(self.mode)
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be positive")


# -- provider protocol -----------------------------------------------------------

_TRACE_FIELDS = ("query_reflection", "search_content_reflection", "action_reasoning")


def tool_schemas(mode: AgentMode, *, allow_search: bool = True) -> list[dict]:
    trace_properties = {name: {"type": "string"} for name in _TRACE_FIELDS}

    def tool(name: str, description: str, extra: dict, required: list[str]) -> dict:
        return {
            "type": "function",
            "function": {
                "name": name,
                "description": description,
                "parameters": {
                    "type": "object",
                    "properties": {**trace_properties, **extra},
                    "required": list(_TRACE_FIELDS) + required,
                },
            },
        }

    tools = []
    if allow_search:
        tools.append(
            tool(
                "initial_search",
                "Broad first look at the document for this question.",
                {"query": {"type": "string"}},
                ["query"],
            )
        )
        content_extra: dict = {
            "text_queries": {"type": "array", "items": {"type": "string"}},
        }
        content_required = ["text_queries"]
        if mode is AgentMode.MUDOC:
            content_extra["image_queries"] = {"type": "array", "items": {"type": "string"}}
        tools.append(
            tool(
                "content_search",
                "Targeted retrieval with specific queries.",
                content_extra,
                content_required,
            )
        )
        tools.append(
            tool(
                "confirm_intent",
                "Ask the learner a clarifying question; ends the turn.",
                {"question": {"type": "string"}},
                ["question"],
            )
        )
    tools.append(
        tool(
            "final_response",
            "Write the answer for the learner; ends the turn.",
            {"content": {"type": "string"}},
            ["content"],
        )
    )
    return tools


class _Unparseable(Exception):
    pass


def _parse_step(result: ChatResult, mode: AgentMode, *, allow_search: bool) -> tuple[ReasoningTrace, AgentAction]:
    call = result.tool_call
    if call is None:
        raise _Unparseable("reply was not a function call")
    if call.arguments is None:
        raise _Unparseable(f"arguments for {call.name!r} were not a JSON object")
    args = call.arguments

    def text_field(key: str) -> str:
        value = args.get(key)
        if not isinstance(value, str) or not value:
            raise _Unparseable(f"{call.name}: {key!r} must be a non-empty string")
        return value

    def string_list(key: str) -> tuple[str, ...]:
        value = args.get(key, [])
        if not isinstance(value, list) or not all(isinstance(v, str) and v for v in value):
            raise _Unparseable(f"{call.name}: {key!r} must be a list of non-empty strings")
        return tuple(value)

    trace = ReasoningTrace(
        *(args[k] if isinstance(args.get(k), str) else "" for k in _TRACE_FIELDS)
    )

    if call.name == "final_response":
        content = args.get("content")
        if not isinstance(content, str):
            raise _Unparseable("final_response: 'content' must be a string")
        return trace, FinalResponse(content)
    if not allow_search:
        raise _Unparseable(f"only final_response is accepted now, got {call.name!r}")
    if call.name == "initial_search":
        return trace, InitialSearch(text_field("query"))
    if call.name == "content_search":
        image_queries = string_list("image_queries")
        if mode is AgentMode.TEXDOC and image_queries:
            LOGGER.info("dropping %d image queries in texdoc mode", len(image_queries))
            image_queries = ()
        return trace, ContentSearch(string_list("text_queries"), image_queries)
    if call.name == "confirm_intent":
        return trace, ConfirmIntent(text_field("question"))
    raise _Unparseable(f"unknown function {call.name!r}")


def _serialize_entry(entry: HistoryEntry) -> dict:
    if isinstance(entry, UserMessage):
        return {"role": "user", "content": entry.text}
    if isinstance(entry, AssistantStep):
        payload = {"trace": asdict(entry.trace), "action": _action_payload(entry.action)}
        return {"role": "assistant", "content": json.dumps(payload, ensure_ascii=False)}
    body = {
        "kind": entry.kind,
        "spans": [asdict(s) for s in entry.spans],
        "images": [asdict(i) for i in entry.images],
    }
    return {"role": "user", "content": "SEARCH RESULTS:\n" + json.dumps(body, ensure_ascii=False)}


def _action_payload(action: AgentAction) -> dict:
    name = {
        InitialSearch: "initial_search",
        ContentSearch: "content_search",
        ConfirmIntent: "confirm_intent",
        FinalResponse: "final_response",
    }[type(action)]
    return {"name": name, **asdict(action)}


def build_provider_messages(
    mode: AgentMode,
    history: list[HistoryEntry],
    *,
    char_budget: int = _HISTORY_CHAR_BUDGET,
) -> list[dict]:
    """History re-sent verbatim; oldest tool-result bodies are elided only
    when the serialized conversation exceeds the character budget."""
    messages = [{"role": "system", "content": build_system_prompt(mode)}]
    entries = [_serialize_entry(e) for e in history]
    total = sum(len(m["content"]) for m in entries)
    if total > char_budget:
        for i, (entry, message) in enumerate(zip(history, entries)):
            if total <= char_budget:
                break
            if isinstance(entry, ToolResult):
                total -= len(message["content"])
                entries[i] = {"role": "user", "content": "SEARCH RESULTS: [elided]"}
                total += len(entries[i]["content"])
    return messages + entries


def step(
    mode: AgentMode,
    history: list[HistoryEntry],
    gateway,
    *,
    allow_search: bool = True,
) -> tuple[ReasoningTrace, AgentAction]:
    """One provider round: request a function call, parse it, reprompt once
    on garbage, and raise ProtocolError if the reprompt is garbage too."""
    messages = build_provider_messages(mode, history)
    tools = tool_schemas(mode, allow_search=allow_search)
    try:
        return _parse_step(gateway.chat(messages, tools), mode, allow_search=allow_search)
    except _Unparseable as first:
        LOGGER.warning("unparseable provider step (%s); reprompting", first)
        retry_messages = messages + [
            {
                "role": "system",
                "content": (
                    f"Your previous reply was invalid: {first}. "
                    "Call exactly one of the provided functions with valid arguments."
                ),
            }
        ]
        try:
            return _parse_step(gateway.chat(retry_messages, tools), mode, allow_search=allow_search)
        except _Unparseable as second:
            raise ProtocolError(f"provider output unparseable after reprompt: {second}") from None


def apply_action(
    mode: AgentMode,
    action: AgentAction,
    retriever: "HybridRetriever",
) -> ToolResult:
    """Run a search action and package results for the conversation history.

    Result caps: initial_search at most initial_k spans; content_search at
    most content_text_k spans and content_image_k images, counted after
    cross-query deduplication.  Image retrieval runs only in mudoc mode.
    """
    config = retriever.config
    if isinstance(action, InitialSearch):
        scored = retriever.search_text(action.query, config.initial_k)
        spans = postprocess_text(scored, retriever.index)
        return ToolResult(kind="initial_search", spans=_span_payloads(spans))

    if isinstance(action, ContentSearch):
        best: dict[str, object] = {}
        for query in action.text_queries:
            for result in retriever.search_text(query, config.content_text_k):
                prior = best.get(result.chunk_id)
                if prior is None or result.hybrid_score > prior.hybrid_score:
                    best[result.chunk_id] = result
        merged = sorted(
            best.values(), key=lambda r: (-r.hybrid_score, r.first_block_id, r.doc_id)
        )[: config.content_text_k]
        spans = postprocess_text(merged, retriever.index)

        images: list[ImageResult] = []
        if mode is AgentMode.MUDOC and action.image_queries:
            best_images: dict[tuple[str, int], object] = {}
            for query in action.image_queries:
                for result in retriever.search_images(query, config.content_image_k):
                    key = (result.doc_id, result.block_id)
                    prior = best_images.get(key)
                    if prior is None or result.hybrid_score > prior.hybrid_score:
                        best_images[key] = result
            top = sorted(
                best_images.values(), key=lambda r: (-r.hybrid_score, r.block_id, r.doc_id)
            )[: config.content_image_k]
            images = [
                ImageResult(
                    doc_id=r.doc_id,
                    block_id=r.block_id,
                    caption=r.caption,
                    description=retriever.index.get_image_record(r.doc_id, r.block_id).description,
                )
                for r in top
            ]
        return ToolResult(kind="content_search", spans=_span_payloads(spans), images=tuple(images))

    raise ValidationError(f"{type(action).__name__} is not a search action")


def _span_payloads(spans) -> tuple[SpanResult, ...]:
    return tuple(SpanResult(doc_id=s.doc_id, block_ids=s.block_ids, text=s.text) for s in spans)


def _chop(text: str, size: int) -> Iterator[str]:
    for start in range(0, len(text), size):
        yield text[start : start + size]


def run_turn(
    state: AgentState,
    user_text: str,
    gateway,
    retriever: "HybridRetriever",
    index: "DocumentIndex | None" = None,
) -> Iterator[StreamEvent]:
    """Run one turn and yield stream events.

    The stream ends with Done on success (history committed) or with Error
    on failure (history left bit-identical to its pre-turn value).
    """
    if not user_text.strip():
        yield ErrorEvent("empty message")
        return
    if index is None:
        index = retriever.index
    work: list[HistoryEntry] = list(state.history)
    work.append(UserMessage(user_text))

    try:
        for iteration in range(1, state.max_iterations + 1):
            allow_search = iteration < state.max_iterations
            yield Status("reasoning")
            trace, action = step(state.mode, work, gateway, allow_search=allow_search)
            yield TraceAvailable(iteration, trace)
            work.append(AssistantStep(trace, action))

            if isinstance(action, (InitialSearch, ContentSearch)):
                yield Status("searching")
                work.append(apply_action(state.mode, action, retriever))
                continue

            yield Status("generating")
            text = action.content if isinstance(action, FinalResponse) else action.question
            yield from transform_stream(_chop(text, _STREAM_CHUNK_CHARS), state.mode, index)
            state.history = work
            yield Done()
            return
        raise AssertionError("unreachable: forced final iteration must end the turn")
    except MudocError as exc:
        LOGGER.warning("turn failed (%s): %s", type(exc).__name__, exc)
        yield ErrorEvent(f"{type(exc).__name__}: {exc}")
