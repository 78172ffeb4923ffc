"""Built index over one or more ingested documents.

Persistence layout (all files carry the same format tag):

    metadata.json   blocks, chunks (minus vectors), image records, doc info
    vectors.npz     chunk content/summary and image vector matrices
    inverted.json   BM25 term statistics for the text and image corpora
    images/<doc>/<block>.bin    raw figure bytes
    pages/<doc>/<n>.png         optional pre-rendered page images

Image bytes are held in memory after load; the corpus scale here is a
textbook, not a warehouse.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .blocks import Block, BlockKind, BoundingBox, Chunk, ImageRecord
from .errors import IndexDimensionError, NotFoundError, ValidationError
from .retrieval import Bm25Corpus, RetrievalConfig, tokenize

LOGGER = logging.getLogger(__name__)

FORMAT_TAG = "mudoc-index/1"
_UNIT_NORM_TOLERANCE = 1e-6


class DocumentIndex:
    def __init__(self) -> None:
        self.dim: int | None = None
        self.blocks: dict[tuple[str, int], Block] = {}
        self.doc_pages: dict[str, int] = {}
        self.chunks: list[Chunk] = []
        self.images: list[ImageRecord] = []
        self.image_bytes: dict[tuple[str, int], bytes] = {}
        self.text_bm25 = Bm25Corpus([])
        self.image_bm25 = Bm25Corpus([])
        self.root: Path | None = None
        self._chunk_by_id: dict[str, Chunk] = {}
        self._content_matrix = np.zeros((0, 0))
        self._summary_matrix = np.zeros((0, 0))
        self._combined_matrix = np.zeros((0, 0))

    # -- construction ---------------------------------------------------------

    def add_document(self, doc_id: str, pages: int, blocks: list[Block]) -> None:
        if doc_id in self.doc_pages:
            raise ValidationError(f"document {doc_id!r} already indexed")
        self.doc_pages[doc_id] = pages
        for block in blocks:
            self.blocks[(doc_id, block.block_id)] = block

    def set_content(
        self,
        chunks: list[Chunk],
        images: list[ImageRecord],
        image_bytes: dict[tuple[str, int], bytes],
        config: RetrievalConfig | None = None,
    ) -> None:
        """Attach embedded chunks/images and build the derived structures."""
        config = config or RetrievalConfig()
        self.chunks = list(chunks)
        self.images = list(images)
        self.image_bytes = dict(image_bytes)
        self._chunk_by_id = {c.chunk_id: c for c in self.chunks}
        if len(self._chunk_by_id) != len(self.chunks):
            raise ValidationError("duplicate chunk_id in index build")
        self._validate_vectors()
        self._content_matrix = _matrix([c.content_vector for c in self.chunks], self.dim)
        self._summary_matrix = _matrix([c.summary_vector for c in self.chunks], self.dim)
        self._combined_matrix = _matrix([i.combined_vector for i in self.images], self.dim)
        self.text_bm25 = Bm25Corpus(
            [tokenize(c.text + "\n" + c.summary) for c in self.chunks],
            k1=config.bm25_k1,
            b=config.bm25_b,
        )
        self.image_bm25 = Bm25Corpus(
            [tokenize(i.search_text) for i in self.images],
            k1=config.bm25_k1,
            b=config.bm25_b,
        )

    def _validate_vectors(self) -> None:
        dims: set[int] = set()
        for chunk in self.chunks:
            if chunk.content_vector is None or chunk.summary_vector is None:
                raise ValidationError(f"chunk {chunk.chunk_id} is missing vectors")
            dims.add(len(chunk.content_vector))
            dims.add(len(chunk.summary_vector))
            for name, vec in (("content", chunk.content_vector), ("summary", chunk.summary_vector)):
                norm = float(np.linalg.norm(vec))
                if abs(norm - 1.0) > _UNIT_NORM_TOLERANCE:
                    raise ValidationError(
                        f"chunk {chunk.chunk_id} {name} vector norm {norm} is not unit"
                    )
        for image in self.images:
            if image.image_vector is None or image.caption_vector is None or image.combined_vector is None:
                raise ValidationError(f"image {image.doc_id}:{image.block_id} is missing vectors")
            dims.add(len(image.image_vector))
            dims.add(len(image.caption_vector))
            dims.add(len(image.combined_vector))
        if len(dims) > 1:
            raise IndexDimensionError(f"mixed embedding dimensions in one build: {sorted(dims)}")
        if dims:
            self.dim = dims.pop()

    # -- lookups ----------------------------------------------------------------

    def get_block(self, doc_id: str, block_id: int) -> Block:
        try:
            return self.blocks[(doc_id, block_id)]
        except KeyError:
            raise NotFoundError(f"unknown block {doc_id}:{block_id}") from None

    def has_block(self, doc_id: str, block_id: int) -> bool:
        return (doc_id, block_id) in self.blocks

    def block_text(self, doc_id: str, block_id: int) -> str:
        return self.get_block(doc_id, block_id).text

    def get_chunk(self, chunk_id: str) -> Chunk:
        try:
            return self._chunk_by_id[chunk_id]
        except KeyError:
            raise NotFoundError(f"unknown chunk {chunk_id}") from None

    def get_image_record(self, doc_id: str, block_id: int) -> ImageRecord:
        for image in self.images:
            if image.doc_id == doc_id and image.block_id == block_id:
                return image
        raise NotFoundError(f"unknown image {doc_id}:{block_id}")

    def image_bytes_for(self, doc_id: str, block_id: int) -> bytes:
        try:
            return self.image_bytes[(doc_id, block_id)]
        except KeyError:
            raise NotFoundError(f"no image bytes for {doc_id}:{block_id}") from None

    def page_image_path(self, doc_id: str, page: int) -> Path | None:
        if self.root is None:
            return None
        path = self.root / "pages" / doc_id / f"{page}.png"
        return path if path.is_file() else None

    def chunk_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return self._content_matrix, self._summary_matrix

    def image_matrix(self) -> np.ndarray:
        return self._combined_matrix

    # -- persistence --------------------------------------------------------------

    def save(self, out_dir: str | Path) -> Path:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        metadata = {
            "format": FORMAT_TAG,
            "dim": self.dim,
            "docs": {doc: {"pages": pages} for doc, pages in self.doc_pages.items()},
            "blocks": [_block_to_dict(b) for b in self.blocks.values()],
            "chunks": [
                {
                    "chunk_id": c.chunk_id,
                    "doc_id": c.doc_id,
                    "block_ids": c.block_ids,
                    "text": c.text,
                    "char_count": c.char_count,
                    "summary": c.summary,
                }
                for c in self.chunks
            ],
            "images": [
                {
                    "doc_id": i.doc_id,
                    "block_id": i.block_id,
                    "caption": i.caption,
                    "description": i.description,
                }
                for i in self.images
            ],
        }
        (root / "metadata.json").write_text(json.dumps(metadata, ensure_ascii=False), encoding="utf-8")
        np.savez(
            root / "vectors.npz",
            chunk_content=self._content_matrix,
            chunk_summary=self._summary_matrix,
            image_image=_matrix([i.image_vector for i in self.images], self.dim),
            image_caption=_matrix([i.caption_vector for i in self.images], self.dim),
            image_combined=self._combined_matrix,
        )
        inverted = {
            "format": FORMAT_TAG,
            "text": self.text_bm25.to_dict(),
            "image": self.image_bm25.to_dict(),
        }
        (root / "inverted.json").write_text(json.dumps(inverted, ensure_ascii=False), encoding="utf-8")
        for (doc_id, block_id), data in self.image_bytes.items():
            image_dir = root / "images" / doc_id
            image_dir.mkdir(parents=True, exist_ok=True)
            (image_dir / f"{block_id}.bin").write_bytes(data)
        self.root = root
        return root

    @classmethod
    def load(cls, in_dir: str | Path) -> "DocumentIndex":
        root = Path(in_dir)
        meta_path = root / "metadata.json"
        if not meta_path.is_file():
            raise NotFoundError(f"no index at {root}")
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
        if metadata.get("format") != FORMAT_TAG:
            raise ValidationError(f"unsupported index format {metadata.get('format')!r}")

        index = cls()
        index.root = root
        index.dim = metadata.get("dim")
        for doc_id, info in metadata["docs"].items():
            index.doc_pages[doc_id] = info["pages"]
        for item in metadata["blocks"]:
            block = _block_from_dict(item)
            index.blocks[(block.doc_id, block.block_id)] = block

        vectors = np.load(root / "vectors.npz")
        content = vectors["chunk_content"]
        summary = vectors["chunk_summary"]
        image_image = vectors["image_image"]
        image_caption = vectors["image_caption"]
        image_combined = vectors["image_combined"]

        chunks = []
        for row, item in enumerate(metadata["chunks"]):
            chunks.append(
                Chunk(
                    chunk_id=item["chunk_id"],
                    doc_id=item["doc_id"],
                    block_ids=list(item["block_ids"]),
                    text=item["text"],
                    char_count=item["char_count"],
                    summary=item["summary"],
                    content_vector=content[row].tolist(),
                    summary_vector=summary[row].tolist(),
                )
            )
        images = []
        image_bytes: dict[tuple[str, int], bytes] = {}
        for row, item in enumerate(metadata["images"]):
            images.append(
                ImageRecord(
                    doc_id=item["doc_id"],
                    block_id=item["block_id"],
                    caption=item["caption"],
                    description=item["description"],
                    image_vector=image_image[row].tolist(),
                    caption_vector=image_caption[row].tolist(),
                    combined_vector=image_combined[row].tolist(),
                )
            )
            blob = root / "images" / item["doc_id"] / f"{item['block_id']}.bin"
            if blob.is_file():
                image_bytes[(item["doc_id"], item["block_id"])] = blob.read_bytes()

        inverted = json.loads((root / "inverted.json").read_text(encoding="utf-8"))
        if inverted.get("format") != FORMAT_TAG:
            raise ValidationError("inverted index format tag mismatch")
        index.chunks = chunks
        index.images = images
        index.image_bytes = image_bytes
        index._chunk_by_id = {c.chunk_id: c for c in chunks}
        index._content_matrix = content
        index._summary_matrix = summary
        index._combined_matrix = image_combined
        index.text_bm25 = Bm25Corpus.from_dict(inverted["text"])
        index.image_bm25 = Bm25Corpus.from_dict(inverted["image"])
        return index


def _matrix(vectors: list[list[float] | None], dim: int | None) -> np.ndarray:
    if not vectors:
        return np.zeros((0, dim or 0), dtype=np.float64)
    return np.asarray(vectors, dtype=np.float64)


def _block_to_dict(block: Block) -> dict:
    return {
        "doc_id": block.doc_id,
        "block_id": block.block_id,
        "page": block.page,
        "bbox": block.bbox.as_list(),
        "kind": block.kind.value,
        "text": block.text,
        "image_ref": block.image_ref,
    }


def _block_from_dict(item: dict) -> Block:
    return Block(
        doc_id=item["doc_id"],
        block_id=item["block_id"],
        page=item["page"],
        bbox=BoundingBox(*item["bbox"]),
        kind=BlockKind(item["kind"]),
        text=item["text"],
        image_ref=item.get("image_ref"),
    )
