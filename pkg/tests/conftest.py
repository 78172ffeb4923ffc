"""Shared test fixtures and builders."""

from __future__ import annotations

import json
import math
from io import BytesIO
from pathlib import Path

import pytest
from PIL import Image

from mudoc.blocks import Block, BlockKind, BoundingBox, Chunk, ImageRecord, IngestConfig
from mudoc.gateway import MockChat, MockGateway
from mudoc.index import DocumentIndex
from mudoc.ingest import ingest_directory


# -- primitive builders -----------------------------------------------------------


def png_bytes(color=(200, 30, 30), size=(4, 4)) -> bytes:
    image = Image.new("RGB", size, color)
    buffer = BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def unit(vector: list[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    return [v / norm for v in vector]


def text_block(doc_id: str, block_id: int, text: str, page: int = 1) -> Block:
    return Block(
        doc_id=doc_id,
        block_id=block_id,
        page=page,
        bbox=BoundingBox(0.1, 0.1, 0.8, 0.1),
        kind=BlockKind.TEXT,
        text=text,
    )


def figure_block(doc_id: str, block_id: int, page: int = 1) -> Block:
    return Block(
        doc_id=doc_id,
        block_id=block_id,
        page=page,
        bbox=BoundingBox(0.2, 0.4, 0.5, 0.3),
        kind=BlockKind.FIGURE,
        image_ref=f"img/{block_id}.png",
    )


def make_chunk(
    doc_id: str,
    ordinal: int,
    blocks: list[Block],
    *,
    summary: str = "summary",
    content_vector: list[float] | None = None,
    summary_vector: list[float] | None = None,
) -> Chunk:
    text = "\n".join(b.text for b in blocks)
    return Chunk(
        chunk_id=f"{doc_id}:c{ordinal}",
        doc_id=doc_id,
        block_ids=[b.block_id for b in blocks],
        text=text,
        char_count=len(text),
        summary=summary,
        content_vector=content_vector,
        summary_vector=summary_vector,
    )


def assemble_index(
    docs: dict[str, tuple[int, list[Block]]],
    chunks: list[Chunk],
    images: list[ImageRecord] | None = None,
    image_bytes: dict[tuple[str, int], bytes] | None = None,
) -> DocumentIndex:
    index = DocumentIndex()
    index.set_content(chunks, images or [], image_bytes or {})
    for doc_id, (pages, blocks) in docs.items():
        index.add_document(doc_id, pages, blocks)
    return index


# -- gateways ---------------------------------------------------------------------


class VectorGateway:
    """Embeddings looked up from preset tables; chat optionally scripted.
    Unknown inputs raise KeyError so tests fail loudly."""

    def __init__(
        self,
        *,
        text_vectors: dict[str, list[float]] | None = None,
        image_text_vectors: dict[str, list[float]] | None = None,
        image_vectors: dict[bytes, list[float]] | None = None,
        script: list[MockChat | Exception] | None = None,
    ) -> None:
        self.text_vectors = text_vectors or {}
        self.image_text_vectors = image_text_vectors or {}
        self.image_vectors = image_vectors or {}
        self._script = list(script) if script is not None else None

    def embed_text(self, texts: list[str]) -> list[list[float]]:
        return [list(self.text_vectors[t]) for t in texts]

    def embed_image_text(self, texts: list[str]) -> list[list[float]]:
        return [list(self.image_text_vectors[t]) for t in texts]

    def embed_image(self, data: bytes) -> list[float]:
        return list(self.image_vectors[data])

    def chat(self, messages, tools=None):
        if self._script is None:
            raise AssertionError("VectorGateway.chat called without a script")
        if not self._script:
            from mudoc.errors import ScriptExhaustedError

            raise ScriptExhaustedError("test chat script exhausted")
        entry = self._script.pop(0)
        if isinstance(entry, Exception):
            raise entry
        return entry.to_result()


class RecordingGateway(MockGateway):
    """Scripted gateway that also captures every chat request."""

    def __init__(self, script, *, seed: int = 0, dim: int = 32):
        super().__init__(seed=seed, dim=dim, script=script)
        self.requests: list[tuple[list, list | None]] = []

    def chat(self, messages, tools=None):
        self.requests.append((messages, tools))
        return super().chat(messages, tools)


TRACE_ARGS = {
    "query_reflection": "what is being asked",
    "search_content_reflection": "what the results said",
    "action_reasoning": "why this action",
}


def action_step(name: str, **fields) -> MockChat:
    """Scripted provider step: one function call with trace + action args."""
    return MockChat(tool_name=name, arguments={**TRACE_ARGS, **fields})


class FakeClock:
    def __init__(self, start: float = 1_700_000_000.0) -> None:
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


# -- toy corpus --------------------------------------------------------------------

TOPIC_WORDS = [
    "mitosis",
    "meiosis",
    "osmosis",
    "diffusion",
    "enzyme",
    "protein",
    "membrane",
    "nucleus",
    "chromosome",
    "ribosome",
    "photosynthesis",
    "respiration",
    "glycolysis",
    "oxidation",
    "electron",
    "gradient",
]


def topic_sentence(word: str, index: int) -> str:
    return (
        f"Section {index}: {word} explained. The process of {word} matters because "
        f"{word} controls how cells behave. Students often confuse {word} with "
        f"related ideas, so this section works through {word} step by step. "
    )


def write_toy_corpus(root: Path, *, doc_id: str = "bio", n_text: int = 16, n_fig: int = 4) -> None:
    """A small layout document: n_text topical text blocks with n_fig figures
    interleaved every 4 blocks, plus the referenced image files."""
    (root / "img").mkdir(parents=True, exist_ok=True)
    records = []
    text_done = 0
    fig_done = 0
    block_id = 0
    while text_done < n_text or fig_done < n_fig:
        if text_done < n_text:
            records.append(
                {
                    "id": block_id,
                    "page": 1 + block_id // 5,
                    "bbox": [0.1, 0.05 + (block_id % 5) * 0.18, 0.8, 0.15],
                    "kind": "text",
                    "text": topic_sentence(TOPIC_WORDS[text_done % len(TOPIC_WORDS)], text_done),
                }
            )
            block_id += 1
            text_done += 1
        if fig_done < n_fig and text_done % 4 == 0:
            file_name = f"img/{block_id}.png"
            color = (40 * (fig_done + 1) % 256, 80, 120)
            (root / file_name).write_bytes(png_bytes(color))
            records.append(
                {
                    "id": block_id,
                    "page": 1 + block_id // 5,
                    "bbox": [0.2, 0.1, 0.5, 0.3],
                    "kind": "figure",
                    "image_file": file_name,
                }
            )
            block_id += 1
            fig_done += 1
    payload = {"doc_id": doc_id, "pages": 1 + (block_id - 1) // 5, "blocks": records}
    (root / f"{doc_id}.json").write_text(json.dumps(payload), encoding="utf-8")


def toy_figure_block_ids(index: DocumentIndex, doc_id: str = "bio") -> list[int]:
    return sorted(b.block_id for (d, _), b in index.blocks.items() if d == doc_id and b.kind is BlockKind.FIGURE)


@pytest.fixture(scope="session")
def toy_index(tmp_path_factory) -> DocumentIndex:
    """Toy corpus ingested once per test session with a deterministic mock."""
    src = tmp_path_factory.mktemp("corpus-src")
    out = tmp_path_factory.mktemp("corpus-index")
    write_toy_corpus(src)
    gateway = MockGateway(seed=7, dim=16)
    ingest_directory(
        src,
        out,
        gateway,
        config=IngestConfig(min_chunk_chars=600, overlap_fraction=0.5, concurrency=2),
    )
    return DocumentIndex.load(out)


@pytest.fixture()
def mock_embedder() -> MockGateway:
    return MockGateway(seed=7, dim=16)


# -- acceptance reporting ------------------------------------------------------------

# test_acceptance.py appends [name, passed] entries; printed after the run.
ACCEPTANCE_LINES: list[list] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")
