"""Provider gateway: one chat-completions surface plus three embedding surfaces.

Two implementations share the same duck-typed interface:

* OpenAIGateway speaks the OpenAI-compatible wire protocol (chat/completions
  and embeddings endpoints) over HTTP with retries, a timeout, and a
  concurrency cap.
* MockGateway is fully offline and deterministic: chat replies come from an
  ordered script (or a responder callable, or a content-hash echo), and
  embeddings are seeded-hash unit vectors.

Embedding surfaces:
    embed_text        text-embedding model; used for chunk content/summary
                      vectors and text-query vectors.
    embed_image_text  text tower of the image-embedding model; used for
                      figure captions and image-query vectors so they share
                      a space with embed_image outputs.
    embed_image       image tower of the image-embedding model.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable

from .errors import GatewayError, ScriptExhaustedError, ValidationError

LOGGER = logging.getLogger(__name__)

# Embedding namespaces keep the three mock surfaces mutually orthogonal-ish.
_NS_TEXT = "text"
_NS_IMAGE_TEXT = "imgtext"
_NS_IMAGE = "image"


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and model settings for an OpenAI-compatible provider."""

    base_url: str = "http://localhost:8080/v1"
    api_key_env: str = "MUDOC_API_KEY"
    chat_model: str = "gpt-4o"
    text_embedding_model: str = "text-embedding-3-small"
    image_embedding_model: str = "siglip-base"
    timeout: float = 60.0
    retries: int = 2
    temperature: float = 0.2
    max_concurrency: int = 8


@dataclass(frozen=True)
class ToolCall:
    """A provider function call. arguments is None when the payload did not
    parse as a JSON object; the raw string is kept for diagnostics."""

    name: str
    arguments: dict | None
    raw_arguments: str = ""


@dataclass(frozen=True)
class ChatResult:
    """Either plain text, a tool call, or (degenerate provider output) neither."""

    text: str | None = None
    tool_call: ToolCall | None = None


def _unit(vector: list[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    if norm == 0.0:
        vector = [1.0] + [0.0] * (len(vector) - 1)
        return vector
    return [v / norm for v in vector]


def hash_embedding(payload: bytes, *, namespace: str, seed: int, dim: int) -> list[float]:
    """Seeded-hash embedding rule shared by the mock surfaces.

    Component i is sha256(f"{seed}:{namespace}:{i}:" + payload), taking the
    first 8 digest bytes as a big-endian integer mapped linearly onto
    [-1, 1); the vector is then L2-normalized.  Documented so tests can
    recompute it independently.
    """
    raw = []
    prefix = f"{seed}:{namespace}:"
    for i in range(dim):
        digest = hashlib.sha256(f"{prefix}{i}:".encode("utf-8") + payload).digest()
        raw.append(int.from_bytes(digest[:8], "big") / 2.0**64 * 2.0 - 1.0)
    return _unit(raw)


def _check_texts(texts: list[str]) -> None:
    if not texts:
        raise ValidationError("embedding input must be a non-empty list")
    for t in texts:
        if not isinstance(t, str) or not t:
            raise ValidationError("embedding inputs must be non-empty strings")


@dataclass
class MockChat:
    """One scripted chat reply.  Exactly one of text / tool fields applies."""

    text: str | None = None
    tool_name: str | None = None
    arguments: dict | None = None
    raw_arguments: str | None = None

    def to_result(self) -> ChatResult:
        if self.tool_name is not None:
            raw = self.raw_arguments
            if raw is None:
                raw = json.dumps(self.arguments or {}, sort_keys=True)
            return ChatResult(tool_call=ToolCall(self.tool_name, self.arguments, raw))
        return ChatResult(text=self.text)


class MockGateway:
    """Deterministic offline provider.

    Chat resolution order: scripted steps (FIFO, exhaustion raises
    ScriptExhaustedError), else a responder callable, else an echo reply
    derived from a content hash of the request.  Script entries may also be
    Exception instances, which are raised in place of a reply.
    """

    def __init__(
        self,
        *,
        seed: int = 0,
        dim: int = 32,
        script: list[MockChat | Exception] | None = None,
        responder: Callable[[list[dict], list[dict] | None], MockChat] | None = None,
    ) -> None:
        self.seed = seed
        self.dim = dim
        self._script = list(script) if script is not None else None
        self._responder = responder
        self._lock = threading.Lock()
        self.chat_calls = 0
        self.embed_text_calls = 0
        self.embed_image_text_calls = 0
        self.embed_image_calls = 0

    def chat(self, messages: list[dict], tools: list[dict] | None = None) -> ChatResult:
        with self._lock:
            self.chat_calls += 1
            if self._script is not None:
                if not self._script:
                    raise ScriptExhaustedError("mock chat script exhausted")
                entry = self._script.pop(0)
                if isinstance(entry, Exception):
                    raise entry
                return entry.to_result()
        if self._responder is not None:
            entry = self._responder(messages, tools)
            if isinstance(entry, Exception):
                raise entry
            return entry.to_result()
        digest = hashlib.sha256(
            json.dumps([self.seed, messages], sort_keys=True, default=str).encode("utf-8")
        ).hexdigest()
        return ChatResult(text=f"mock-reply-{digest[:16]}")

    def embed_text(self, texts: list[str]) -> list[list[float]]:
        _check_texts(texts)
        with self._lock:
            self.embed_text_calls += 1
        return [
            hash_embedding(t.encode("utf-8"), namespace=_NS_TEXT, seed=self.seed, dim=self.dim)
            for t in texts
        ]

    def embed_image_text(self, texts: list[str]) -> list[list[float]]:
        _check_texts(texts)
        with self._lock:
            self.embed_image_text_calls += 1
        return [
            hash_embedding(t.encode("utf-8"), namespace=_NS_IMAGE_TEXT, seed=self.seed, dim=self.dim)
            for t in texts
        ]

    def embed_image(self, data: bytes) -> list[float]:
        if not data:
            raise ValidationError("embed_image requires non-empty bytes")
        with self._lock:
            self.embed_image_calls += 1
        return hash_embedding(data, namespace=_NS_IMAGE, seed=self.seed, dim=self.dim)


class _HttpxTransport:
    """Default JSON-over-HTTP transport. Kept separate so tests can inject a
    counting or failing stand-in without touching retry logic."""

    def __init__(self, config: ProviderConfig) -> None:
        import httpx

        self._config = config
        self._client = httpx.Client(timeout=config.timeout)

    def __call__(self, path: str, payload: dict) -> dict:
        import httpx

        key = os.environ.get(self._config.api_key_env, "")
        url = self._config.base_url.rstrip("/") + path
        try:
            response = self._client.post(
                url,
                json=payload,
                headers={"Authorization": f"Bearer {key}"} if key else {},
            )
        except httpx.HTTPError as exc:
            raise GatewayError(f"transport failure calling {path}: {type(exc).__name__}") from exc
        if response.status_code >= 500 or response.status_code == 429:
            raise GatewayError(f"provider returned {response.status_code} for {path}")
        if response.status_code >= 400:
            # Client errors are not retryable; wrap in a non-retryable marker.
            raise _FatalGatewayError(f"provider rejected {path}: {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise GatewayError(f"non-JSON provider response for {path}") from exc


class _FatalGatewayError(GatewayError):
    """Provider rejected the request; retrying cannot help."""


class OpenAIGateway:
    """OpenAI-compatible provider client.

    Retries transient failures with exponential backoff (0.5 * 2**attempt
    seconds) up to config.retries extra attempts; a concurrency semaphore
    caps in-flight requests.  The API key is read from the environment at
    call time and never logged.

    Image inputs are sent to the embeddings endpoint as data URLs in the
    standard ``input`` array, under the configured image-embedding model.
    """

    def __init__(
        self,
        config: ProviderConfig | None = None,
        *,
        transport: Callable[[str, dict], dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config or ProviderConfig()
        self._transport = transport or _HttpxTransport(self.config)
        self._sleep = sleep
        self._semaphore = threading.Semaphore(self.config.max_concurrency)

    def _call(self, path: str, payload: dict) -> dict:
        attempts = self.config.retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(0.5 * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    return self._transport(path, payload)
            except _FatalGatewayError:
                raise
            except GatewayError as exc:
                last = exc
                LOGGER.warning("provider call %s failed (attempt %d/%d): %s", path, attempt + 1, attempts, exc)
        raise GatewayError(f"provider call {path} failed after {attempts} attempts") from last

    def chat(self, messages: list[dict], tools: list[dict] | None = None) -> ChatResult:
        payload: dict = {
            "model": self.config.chat_model,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        if tools:
            payload["tools"] = tools
        data = self._call("/chat/completions", payload)
        try:
            message = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError("malformed chat completion payload") from exc
        calls = message.get("tool_calls") or []
        if calls:
            fn = calls[0].get("function", {})
            name = fn.get("name", "")
            raw = fn.get("arguments", "")
            try:
                parsed = json.loads(raw)
                arguments = parsed if isinstance(parsed, dict) else None
            except (TypeError, ValueError):
                arguments = None
            return ChatResult(tool_call=ToolCall(name, arguments, raw if isinstance(raw, str) else ""))
        return ChatResult(text=message.get("content"))

    def _embed(self, model: str, inputs: list) -> list[list[float]]:
        data = self._call("/embeddings", {"model": model, "input": inputs})
        try:
            rows = sorted(data["data"], key=lambda row: row["index"])
            vectors = [[float(v) for v in row["embedding"]] for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise GatewayError("malformed embeddings payload") from exc
        if len(vectors) != len(inputs):
            raise GatewayError("embeddings payload count mismatch")
        return [_unit(v) for v in vectors]

    def embed_text(self, texts: list[str]) -> list[list[float]]:
        _check_texts(texts)
        return self._embed(self.config.text_embedding_model, texts)

    def embed_image_text(self, texts: list[str]) -> list[list[float]]:
        _check_texts(texts)
        return self._embed(self.config.image_embedding_model, texts)

    def embed_image(self, data: bytes) -> list[float]:
        if not data:
            raise ValidationError("embed_image requires non-empty bytes")
        url = "data:application/octet-stream;base64," + base64.b64encode(data).decode("ascii")
        return self._embed(self.config.image_embedding_model, [url])[0]
