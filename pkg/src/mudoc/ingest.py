"""Ingestion: layout JSON in, searchable index out.

Input format, one JSON file per document:

    {
      "doc_id": "bio-textbook",
      "pages": 447,
      "blocks": [
        {"id": 0, "page": 1, "bbox": [x, y, w, h], "kind": "text", "text": "..."},
        {"id": 1, "page": 1, "bbox": [x, y, w, h], "kind": "figure", "image_file": "img/0001.png"}
      ]
    }

Blocks must be listed in reading order; bbox values are normalized page
coordinates.  Figure image files are resolved relative to the input
directory.  An optional pages/<doc_id>/<n>.png tree is copied through for
the viewer.

The pipeline: parse -> chunk -> summarize/describe (bounded concurrency)
-> embed -> index.  Chunks whose text is pure whitespace are kept as
members of the block table but excluded from search (there is nothing to
summarize or embed).
"""

from __future__ import annotations

import base64
import json
import logging
import math
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

from .blocks import Block, BlockKind, BoundingBox, Chunk, ImageRecord, IngestConfig
from .errors import (
    GatewayError,
    ImageError,
    IndexDimensionError,
    IngestError,
    ParseError,
    ValidationError,
)
from .index import DocumentIndex
from .retrieval import RetrievalConfig

LOGGER = logging.getLogger(__name__)

_SUMMARY_SYSTEM = (
    "You condense textbook passages. Reply with a succinct summary of the "
    "passage (3-5 sentences, plain text, no preamble)."
)
_CAPTION_SYSTEM = (
    "You caption textbook figures. Reply with one short caption line for the "
    "image, plain text, no preamble."
)
_DESCRIPTION_SYSTEM = (
    "You describe textbook figures for retrieval. Reply with a detailed "
    "description of everything visible in the image, plain text."
)


@dataclass
class ParsedDocument:
    doc_id: str
    pages: int
    blocks: list[Block]


@dataclass
class IngestReport:
    documents: int = 0
    blocks: int = 0
    chunks: int = 0
    skipped_chunks: int = 0
    images: int = 0
    out_dir: str = ""
    warnings: list[str] = field(default_factory=list)


# -- parsing -------------------------------------------------------------------


def parse_layout(data: bytes | str, *, source: str = "<memory>") -> ParsedDocument:
    """Parse one layout-analysis JSON document.

    Blocks come back in reading order with block_ids reassigned 0..n-1; the
    input record ids are only used to name records in error messages.
    Structural problems raise ParseError, constraint violations raise
    ValidationError.
    """
    try:
        payload = json.loads(data)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"{source}: top level must be an object")
    doc_id = payload.get("doc_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise ParseError(f"{source}: doc_id must be a non-empty string")
    pages = payload.get("pages")
    if not isinstance(pages, int) or isinstance(pages, bool) or pages < 1:
        raise ParseError(f"{source}: pages must be a positive integer")
    records = payload.get("blocks")
    if not isinstance(records, list):
        raise ParseError(f"{source}: blocks must be a list")

    blocks: list[Block] = []
    for position, record in enumerate(records):
        label = f"{source}: record {position}"
        if not isinstance(record, dict):
            raise ParseError(f"{label} must be an object")
        if "id" in record:
            label = f"{label} (id={record['id']!r})"
        kind_raw = record.get("kind")
        if kind_raw not in (BlockKind.TEXT.value, BlockKind.FIGURE.value):
            raise ParseError(f"{label}: unknown kind {kind_raw!r}")
        page = record.get("page")
        if not isinstance(page, int) or isinstance(page, bool):
            raise ParseError(f"{label}: page must be an integer")
        bbox_raw = record.get("bbox")
        if (
            not isinstance(bbox_raw, list)
            or len(bbox_raw) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox_raw)
        ):
            raise ParseError(f"{label}: bbox must be four numbers")
        kind = BlockKind(kind_raw)
        text = record.get("text", "")
        if not isinstance(text, str):
            raise ParseError(f"{label}: text must be a string")
        image_file = record.get("image_file")
        if kind is BlockKind.FIGURE:
            if not isinstance(image_file, str) or not image_file:
                raise ParseError(f"{label}: figure records need an image_file")
        elif image_file is not None:
            raise ParseError(f"{label}: text records must not carry image_file")
        block = Block(
            doc_id=doc_id,
            block_id=position,
            page=page,
            bbox=BoundingBox(*(float(v) for v in bbox_raw)),
            kind=kind,
            text=text if kind is BlockKind.TEXT else "",
            image_ref=image_file if kind is BlockKind.FIGURE else None,
        )
        try:
            block.validate()
        except ValidationError as exc:
            raise ValidationError(f"{label}: {exc}") from None
        if page > pages:
            raise ValidationError(f"{label}: page {page} exceeds document page count {pages}")
        blocks.append(block)
    return ParsedDocument(doc_id=doc_id, pages=pages, blocks=blocks)


# -- chunking ------------------------------------------------------------------


def build_chunks(doc_id: str, blocks: list[Block], config: IngestConfig | None = None) -> list[Chunk]:
    """Group consecutive text blocks into overlapping chunks.

    A chunk accumulates blocks until their summed text length reaches
    min_chunk_chars; the next chunk starts at member index
    ceil(overlap_fraction * n) of the previous n-member chunk.  Figures
    never join chunks.  The final chunk may fall short of the floor.

    Two guard rails keep the overlap rule well-defined: a non-final chunk
    that closed with a single (oversized) block is widened to two blocks,
    and the start offset is clamped to [1, n-1] so consecutive chunks always
    share at least one block while still making progress.
    """
    config = config or IngestConfig()
    config.validate()
    texts = [b for b in blocks if b.kind is BlockKind.TEXT]
    if not texts:
        return []

    chunks: list[Chunk] = []
    start = 0
    while start < len(texts):
        end = start
        size = 0
        while end < len(texts) and size < config.min_chunk_chars:
            size += len(texts[end].text)
            end += 1
        if end - start == 1 and end < len(texts):
            end += 1
        members = texts[start:end]
        text = "\n".join(b.text for b in members)
        chunks.append(
            Chunk(
                chunk_id=f"{doc_id}:c{len(chunks)}",
                doc_id=doc_id,
                block_ids=[b.block_id for b in members],
                text=text,
                char_count=len(text),
            )
        )
        if end >= len(texts):
            break
        count = end - start
        offset = math.ceil(config.overlap_fraction * count)
        start += max(1, min(offset, count - 1))
    return chunks


# -- provider enrichment ---------------------------------------------------------


def summarize_chunk(chunk: Chunk, gateway, *, max_chars: int = 1200) -> str:
    """One-shot summary of a chunk's text. The summary is embedded alongside
    the content, so it is clipped to a bounded length."""
    if not chunk.text.strip():
        raise ValidationError(f"chunk {chunk.chunk_id} has no text to summarize")
    result = gateway.chat(
        [
            {"role": "system", "content": _SUMMARY_SYSTEM},
            {"role": "user", "content": chunk.text},
        ]
    )
    summary = (result.text or "").strip()
    if not summary:
        raise GatewayError(f"provider returned an empty summary for {chunk.chunk_id}")
    return summary[:max_chars]


def describe_image(data: bytes, gateway) -> tuple[str, str]:
    """Generate (caption, description) for one figure image."""
    _check_image(data)
    url = "data:image/png;base64," + base64.b64encode(data).decode("ascii")
    content = [
        {"type": "text", "text": "Here is the figure."},
        {"type": "image_url", "image_url": {"url": url}},
    ]
    caption = (
        gateway.chat(
            [{"role": "system", "content": _CAPTION_SYSTEM}, {"role": "user", "content": content}]
        ).text
        or ""
    ).strip()
    description = (
        gateway.chat(
            [{"role": "system", "content": _DESCRIPTION_SYSTEM}, {"role": "user", "content": content}]
        ).text
        or ""
    ).strip()
    if not caption or not description:
        raise GatewayError("provider returned an empty caption or description")
    return caption, description


def _check_image(data: bytes) -> None:
    if not data:
        raise ImageError("image is empty")
    try:
        from PIL import Image

        with Image.open(BytesIO(data)) as img:
            img.verify()
    except ImageError:
        raise
    except Exception as exc:
        raise ImageError(f"undecodable image: {type(exc).__name__}") from None


# -- embedding ------------------------------------------------------------------


def embed_and_index(
    chunks: list[Chunk],
    images: list[ImageRecord],
    gateway,
    *,
    image_bytes: dict[tuple[str, int], bytes] | None = None,
    config: RetrievalConfig | None = None,
    batch_size: int = 16,
) -> DocumentIndex:
    """Embed chunk text/summaries and image captions, then build the index.

    combined_vector is the exact elementwise mean of the image and caption
    vectors, both of which come from the image-embedding model so they share
    one space.  Callers still need to add_document() the block tables.
    """
    image_bytes = image_bytes or {}
    for chunk in chunks:
        if not chunk.text.strip():
            raise ValidationError(f"chunk {chunk.chunk_id} has empty text")
        if not chunk.summary.strip():
            raise ValidationError(f"chunk {chunk.chunk_id} has no summary")

    for batch_start in range(0, len(chunks), batch_size):
        batch = chunks[batch_start : batch_start + batch_size]
        content_vectors = gateway.embed_text([c.text for c in batch])
        summary_vectors = gateway.embed_text([c.summary for c in batch])
        for chunk, cv, sv in zip(batch, content_vectors, summary_vectors):
            chunk.content_vector = cv
            chunk.summary_vector = sv

    if images:
        caption_vectors = gateway.embed_image_text([img.caption for img in images])
        for record, caption_vector in zip(images, caption_vectors):
            data = image_bytes.get((record.doc_id, record.block_id))
            if data is None:
                raise ImageError(f"missing image bytes for {record.doc_id}:{record.block_id}")
            image_vector = gateway.embed_image(data)
            if len(image_vector) != len(caption_vector):
                raise IndexDimensionError(
                    f"image/caption dimension mismatch for {record.doc_id}:{record.block_id}"
                )
            record.image_vector = image_vector
            record.caption_vector = caption_vector
            record.combined_vector = [(a + b) / 2.0 for a, b in zip(image_vector, caption_vector)]

    index = DocumentIndex()
    index.set_content(chunks, images, image_bytes, config)
    return index


# -- orchestration -----------------------------------------------------------------


def ingest_directory(
    input_dir: str | Path,
    out_dir: str | Path,
    gateway,
    *,
    config: IngestConfig | None = None,
    retrieval_config: RetrievalConfig | None = None,
) -> IngestReport:
    """Ingest every *.json layout file under input_dir and save one index.

    Summaries and image descriptions run under a bounded thread pool; the
    gateway handles transient retries, and anything that still fails aborts
    the ingest with IngestError (a partially enriched index is never saved).
    """
    config = config or IngestConfig()
    config.validate()
    input_root = Path(input_dir)
    report = IngestReport(out_dir=str(out_dir))

    layout_files = sorted(input_root.glob("*.json"))
    if not layout_files:
        raise IngestError(f"no layout JSON files under {input_root}")

    documents: list[ParsedDocument] = []
    for path in layout_files:
        documents.append(parse_layout(path.read_text(encoding="utf-8"), source=path.name))
    seen = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc.doc_id!r} across input files")
        seen.add(doc.doc_id)

    all_chunks: list[Chunk] = []
    figure_blocks: list[Block] = []
    for doc in documents:
        chunks = build_chunks(doc.doc_id, doc.blocks, config)
        for chunk in chunks:
            if chunk.text.strip():
                all_chunks.append(chunk)
            else:
                report.skipped_chunks += 1
                report.warnings.append(f"skipped whitespace-only chunk {chunk.chunk_id}")
        figure_blocks.extend(b for b in doc.blocks if b.kind is BlockKind.FIGURE)
        report.documents += 1
        report.blocks += len(doc.blocks)

    image_bytes: dict[tuple[str, int], bytes] = {}
    for block in figure_blocks:
        path = input_root / (block.image_ref or "")
        if not path.is_file():
            raise ImageError(f"figure {block.doc_id}:{block.block_id}: missing file {block.image_ref}")
        image_bytes[(block.doc_id, block.block_id)] = path.read_bytes()

    try:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            summaries = list(
                pool.map(lambda c: summarize_chunk(c, gateway, max_chars=config.summary_max_chars), all_chunks)
            )
            described = list(
                pool.map(
                    lambda b: describe_image(image_bytes[(b.doc_id, b.block_id)], gateway),
                    figure_blocks,
                )
            )
    except GatewayError as exc:
        raise IngestError(f"provider enrichment failed: {exc}") from exc
    for chunk, summary in zip(all_chunks, summaries):
        chunk.summary = summary
    images = [
        ImageRecord(doc_id=b.doc_id, block_id=b.block_id, caption=caption, description=description)
        for b, (caption, description) in zip(figure_blocks, described)
    ]
    report.chunks = len(all_chunks)
    report.images = len(images)

    try:
        index = embed_and_index(
            all_chunks, images, gateway, image_bytes=image_bytes, config=retrieval_config
        )
    except GatewayError as exc:
        raise IngestError(f"embedding failed: {exc}") from exc
    for doc in documents:
        index.add_document(doc.doc_id, doc.pages, doc.blocks)
    index.save(out_dir)

    pages_src = input_root / "pages"
    if pages_src.is_dir():
        shutil.copytree(pages_src, Path(out_dir) / "pages", dirs_exist_ok=True)

    LOGGER.info(
        "ingested %d document(s): %d blocks, %d chunks (%d skipped), %d images",
        report.documents,
        report.blocks,
        report.chunks,
        report.skipped_chunks,
        report.images,
    )
    return report
