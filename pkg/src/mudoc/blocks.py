"""Core document types: layout blocks, text chunks, and indexed images.

A document arrives as a flat list of layout-analyzed blocks in reading
order.  Text blocks are grouped into overlapping chunks for retrieval;
figure blocks become image records.  Everything downstream (retrieval,
citations, the viewer) addresses content by (doc_id, block_id).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import ValidationError

# doc_id appears inside citation markers ([[cite:<doc_id>:...]]), so it must
# not contain the marker's own delimiters.
_DOC_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class BlockKind(str, Enum):
    TEXT = "text"
    FIGURE = "figure"


@dataclass(frozen=True)
class BoundingBox:
    """Normalized page coordinates: origin top-left, all values in [0, 1]."""

    x: float
    y: float
    w: float
    h: float

    def validate(self) -> None:
        for name, value in (("x", self.x), ("y", self.y), ("w", self.w), ("h", self.h)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"bbox component {name}={value!r} outside [0, 1]")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"bbox has non-positive extent w={self.w!r} h={self.h!r}")

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class Block:
    """One layout block. block_id is unique and sequential per document."""

    doc_id: str
    block_id: int
    page: int
    bbox: BoundingBox
    kind: BlockKind
    text: str = ""
    image_ref: str | None = None

    def validate(self) -> None:
        if not _DOC_ID_RE.match(self.doc_id):
            raise ValidationError(f"doc_id {self.doc_id!r} must match [A-Za-z0-9_.-]+")
        if self.block_id < 0:
            raise ValidationError(f"block_id {self.block_id} must be non-negative")
        if self.page < 1:
            raise ValidationError(f"block {self.block_id}: page {self.page} must be >= 1")
        self.bbox.validate()
        if self.kind is BlockKind.FIGURE and not self.image_ref:
            raise ValidationError(f"figure block {self.block_id} has no image reference")
        if self.kind is BlockKind.TEXT and self.image_ref is not None:
            raise ValidationError(f"text block {self.block_id} carries an image reference")


@dataclass
class Chunk:
    """A run of consecutive text blocks, large enough to retrieve on its own.

    text joins the member block texts with single newlines; char_count is
    the length of that joined text.  summary and the two vectors are filled
    in by later ingest stages.
    """

    chunk_id: str
    doc_id: str
    block_ids: list[int]
    text: str
    char_count: int
    summary: str = ""
    content_vector: list[float] | None = None
    summary_vector: list[float] | None = None

    @property
    def first_block_id(self) -> int:
        return self.block_ids[0]


@dataclass
class ImageRecord:
    """An indexed figure: generated caption/description plus embeddings.

    combined_vector is the elementwise mean of image_vector and
    caption_vector.  search_text (caption + description) feeds the sparse
    side of image retrieval.
    """

    doc_id: str
    block_id: int
    caption: str
    description: str
    image_vector: list[float] | None = None
    caption_vector: list[float] | None = None
    combined_vector: list[float] | None = None

    @property
    def search_text(self) -> str:
        return f"{self.caption}\n{self.description}"


@dataclass(frozen=True)
class IngestConfig:
    """Chunking knobs.

    min_chunk_chars: a chunk keeps accumulating blocks until the summed
    block-text length reaches this floor (final tail chunk may be shorter).
    overlap_fraction: the next chunk starts at member index
    ceil(overlap_fraction * n) of the previous n-member chunk.
    """

    min_chunk_chars: int = 8000
    overlap_fraction: float = 0.5
    summary_max_chars: int = 1200
    concurrency: int = 4

    def validate(self) -> None:
        if self.min_chunk_chars < 1:
            raise ValidationError("min_chunk_chars must be positive")
        if not 0.0 < self.overlap_fraction < 1.0:
            raise ValidationError("overlap_fraction must lie strictly between 0 and 1")
        if self.concurrency < 1:
            raise ValidationError("concurrency must be positive")


class Condition(str, Enum):
    """Study condition; gates which endpoints a session may use."""

    MUDOC = "mudoc"
    TEXDOC = "texdoc"
    DOCSEARCH = "docsearch"
