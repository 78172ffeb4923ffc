"""Hybrid retrieval: Okapi BM25 plus dense cosine similarity.

Text search weights the dense side at 0.75 and BM25 at 0.25; image search
inverts the weights (BM25 over generated captions/descriptions carries most
of the signal there).  Both normalize raw scores per query with min-max over
the candidate pool before mixing, so the two scales are comparable:

    hybrid = w_dense * norm(dense) + w_sparse * norm(sparse)

The candidate pool is the union of the top pool_size candidates by dense
score and by sparse score; ties rank the candidate with the lower first
block id first.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ValidationError

if TYPE_CHECKING:
    from .index import DocumentIndex

_TOKEN_RE = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class RetrievalConfig:
    text_dense_weight: float = 0.75
    text_sparse_weight: float = 0.25
    image_sparse_weight: float = 0.75
    image_dense_weight: float = 0.25
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    pool_size: int = 50
    initial_k: int = 3
    content_text_k: int = 10
    content_image_k: int = 5
    docsearch_k: int = 10

    def validate(self) -> None:
        for name in ("text_dense_weight", "text_sparse_weight", "image_sparse_weight", "image_dense_weight"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if not math.isclose(self.text_dense_weight + self.text_sparse_weight, 1.0):
            raise ValidationError("text weights must sum to 1")
        if not math.isclose(self.image_sparse_weight + self.image_dense_weight, 1.0):
            raise ValidationError("image weights must sum to 1")
        if self.bm25_k1 < 0 or not 0 <= self.bm25_b <= 1:
            raise ValidationError("BM25 parameters out of range")
        for name in ("pool_size", "initial_k", "content_text_k", "content_image_k", "docsearch_k"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")


class Bm25Corpus:
    """Okapi BM25 statistics over a fixed corpus of token lists.

    IDF is floored at zero so terms present in most documents never push a
    score negative.  Each occurrence of a query term contributes; an empty
    corpus scores everything 0.
    """

    def __init__(self, token_lists: Sequence[Sequence[str]], *, k1: float = 1.2, b: float = 0.75) -> None:
        self.k1 = k1
        self.b = b
        self.doc_freqs: list[Counter[str]] = [Counter(tokens) for tokens in token_lists]
        self.doc_lens = [sum(freqs.values()) for freqs in self.doc_freqs]
        self.n_docs = len(self.doc_freqs)
        self.avgdl = sum(self.doc_lens) / self.n_docs if self.n_docs else 0.0
        self.df: Counter[str] = Counter()
        for freqs in self.doc_freqs:
            self.df.update(freqs.keys())

    def idf(self, term: str) -> float:
        if self.n_docs == 0:
            return 0.0
        df = self.df.get(term, 0)
        return max(0.0, math.log((self.n_docs - df + 0.5) / (df + 0.5)))

    def score(self, query_tokens: Sequence[str], doc_index: int) -> float:
        freqs = self.doc_freqs[doc_index]
        dl = self.doc_lens[doc_index]
        ratio = dl / self.avgdl if self.avgdl > 0 else 0.0
        denom_base = self.k1 * (1.0 - self.b + self.b * ratio)
        total = 0.0
        for term in query_tokens:
            f = freqs.get(term, 0)
            if f == 0:
                continue
            total += self.idf(term) * f * (self.k1 + 1.0) / (f + denom_base)
        return total

    def scores(self, query_tokens: Sequence[str]) -> list[float]:
        return [self.score(query_tokens, i) for i in range(self.n_docs)]

    def to_dict(self) -> dict:
        return {
            "k1": self.k1,
            "b": self.b,
            "docs": [dict(freqs) for freqs in self.doc_freqs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Bm25Corpus":
        corpus = cls([], k1=data["k1"], b=data["b"])
        corpus.doc_freqs = [Counter(doc) for doc in data["docs"]]
        corpus.doc_lens = [sum(freqs.values()) for freqs in corpus.doc_freqs]
        corpus.n_docs = len(corpus.doc_freqs)
        corpus.avgdl = sum(corpus.doc_lens) / corpus.n_docs if corpus.n_docs else 0.0
        corpus.df = Counter()
        for freqs in corpus.doc_freqs:
            corpus.df.update(freqs.keys())
        return corpus


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    doc_id: str
    first_block_id: int
    dense_score: float
    sparse_score: float
    hybrid_score: float


@dataclass(frozen=True)
class ScoredImage:
    doc_id: str
    block_id: int
    caption: str
    dense_score: float
    sparse_score: float
    hybrid_score: float


@dataclass(frozen=True)
class TextSpan:
    """Merged retrieval unit: a maximal group of result chunks that share
    blocks, flattened back to unique blocks in reading order."""

    doc_id: str
    block_ids: tuple[int, ...]
    text: str
    chunk_ids: tuple[str, ...]
    hybrid_score: float

    @property
    def first_block_id(self) -> int:
        return self.block_ids[0]


def min_max_normalize(scores: Sequence[float]) -> list[float]:
    """Map the pool's max to 1 and min to 0. Pools without score spread
    (single candidate, or all scores equal) map everything to 1."""
    if not scores:
        return []
    lo = min(scores)
    hi = max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def _top_indices(scores: Sequence[float], limit: int, tie_keys: Sequence[tuple]) -> list[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i],) + tuple(tie_keys[i]))
    return order[:limit]


class HybridRetriever:
    """Query-time search over a built DocumentIndex."""

    def __init__(self, index: "DocumentIndex", gateway, config: RetrievalConfig | None = None) -> None:
        self.index = index
        self.gateway = gateway
        self.config = config or RetrievalConfig()
        self.config.validate()

    # -- text ---------------------------------------------------------------

    def search_text(self, query: str, k: int) -> list[ScoredChunk]:
        """Top-k chunks by hybrid score.

        Dense score is the max cosine of the query embedding against the
        chunk's content and summary vectors; sparse score is BM25 over the
        chunk's content+summary token stream.
        """
        if k < 1:
            raise ValidationError("k must be positive")
        chunks = self.index.chunks
        if not chunks:
            return []
        query_vec = np.asarray(self.gateway.embed_text([query])[0], dtype=np.float64)
        content, summary = self.index.chunk_matrices()
        dense = np.maximum(_cosine_rows(content, query_vec), _cosine_rows(summary, query_vec))
        sparse = self.index.text_bm25.scores(tokenize(query))
        tie_keys = [(c.first_block_id, c.doc_id) for c in chunks]
        pool = self._pool(dense.tolist(), sparse, tie_keys)
        ranked = self._rank(
            pool,
            dense.tolist(),
            sparse,
            self.config.text_dense_weight,
            self.config.text_sparse_weight,
            tie_keys,
        )
        results = []
        for i, hybrid in ranked[:k]:
            c = chunks[i]
            results.append(
                ScoredChunk(
                    chunk_id=c.chunk_id,
                    doc_id=c.doc_id,
                    first_block_id=c.first_block_id,
                    dense_score=float(dense[i]),
                    sparse_score=float(sparse[i]),
                    hybrid_score=hybrid,
                )
            )
        return results

    # -- images -------------------------------------------------------------

    def search_images(self, query: str, k: int) -> list[ScoredImage]:
        """Top-k images. Sparse side matches the query against generated
        caption+description text; dense side embeds the query into the image
        space and compares against the stored combined vectors."""
        if k < 1:
            raise ValidationError("k must be positive")
        images = self.index.images
        if not images:
            return []
        query_vec = np.asarray(self.gateway.embed_image_text([query])[0], dtype=np.float64)
        combined = self.index.image_matrix()
        dense = _cosine_rows(combined, query_vec)
        sparse = self.index.image_bm25.scores(tokenize(query))
        tie_keys = [(img.block_id, img.doc_id) for img in images]
        pool = self._pool(dense.tolist(), sparse, tie_keys)
        ranked = self._rank(
            pool,
            dense.tolist(),
            sparse,
            self.config.image_dense_weight,
            self.config.image_sparse_weight,
            tie_keys,
        )
        results = []
        for i, hybrid in ranked[:k]:
            img = images[i]
            results.append(
                ScoredImage(
                    doc_id=img.doc_id,
                    block_id=img.block_id,
                    caption=img.caption,
                    dense_score=float(dense[i]),
                    sparse_score=float(sparse[i]),
                    hybrid_score=hybrid,
                )
            )
        return results

    # -- shared -------------------------------------------------------------

    def _pool(self, dense: list[float], sparse: list[float], tie_keys: list[tuple]) -> list[int]:
        limit = self.config.pool_size
        members = set(_top_indices(dense, limit, tie_keys)) | set(_top_indices(sparse, limit, tie_keys))
        return sorted(members)

    @staticmethod
    def _rank(
        pool: list[int],
        dense: list[float],
        sparse: list[float],
        dense_weight: float,
        sparse_weight: float,
        tie_keys: list[tuple],
    ) -> list[tuple[int, float]]:
        """Weighted sum of per-pool min-max normalized scores, descending;
        ties go to the lower (first) block id, then doc id."""
        norm_dense = min_max_normalize([dense[i] for i in pool])
        norm_sparse = min_max_normalize([sparse[i] for i in pool])
        hybrid = {
            i: dense_weight * nd + sparse_weight * ns
            for i, nd, ns in zip(pool, norm_dense, norm_sparse)
        }
        order = sorted(pool, key=lambda i: (-hybrid[i],) + tuple(tie_keys[i]))
        return [(i, hybrid[i]) for i in order]


def _cosine_rows(matrix: np.ndarray, query_vec: np.ndarray) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(matrix.shape[0], dtype=np.float64)
    row_norms = np.linalg.norm(matrix, axis=1)
    qn = float(np.linalg.norm(query_vec))
    denom = row_norms * qn
    dots = matrix @ query_vec
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    return out


def postprocess_text(results: Sequence[ScoredChunk], index: "DocumentIndex") -> list[TextSpan]:
    """Restore document order and deduplicate overlapping result chunks.

    Chunks from the same document that share at least one block merge into a
    single span (transitively); each span lists unique block ids ascending
    and concatenates the block texts with newlines.  Spans are ordered by
    (doc_id, first block id).
    """
    by_doc: dict[str, list[ScoredChunk]] = {}
    for result in results:
        by_doc.setdefault(result.doc_id, []).append(result)

    spans: list[TextSpan] = []
    for doc_id in sorted(by_doc):
        groups: list[dict] = []
        ordered = sorted(by_doc[doc_id], key=lambda r: r.first_block_id)
        for result in ordered:
            chunk = index.get_chunk(result.chunk_id)
            ids = set(chunk.block_ids)
            merged = None
            for group in groups:
                if group["ids"] & ids:
                    merged = group
                    break
            if merged is None:
                groups.append({"ids": ids, "chunks": [result]})
            else:
                merged["ids"] |= ids
                merged["chunks"].append(result)
        # A later chunk can bridge two earlier groups; fold until stable.
        groups = _coalesce(groups)
        for group in groups:
            block_ids = tuple(sorted(group["ids"]))
            text = "\n".join(index.block_text(doc_id, b) for b in block_ids)
            chunk_ids = tuple(r.chunk_id for r in sorted(group["chunks"], key=lambda r: r.first_block_id))
            spans.append(
                TextSpan(
                    doc_id=doc_id,
                    block_ids=block_ids,
                    text=text,
                    chunk_ids=chunk_ids,
                    hybrid_score=max(r.hybrid_score for r in group["chunks"]),
                )
            )
    spans.sort(key=lambda s: (s.doc_id, s.first_block_id))
    return spans


def _coalesce(groups: list[dict]) -> list[dict]:
    changed = True
    while changed:
        changed = False
        out: list[dict] = []
        for group in groups:
            target = None
            for existing in out:
                if existing["ids"] & group["ids"]:
                    target = existing
                    break
            if target is None:
                out.append(group)
            else:
                target["ids"] |= group["ids"]
                target["chunks"].extend(group["chunks"])
                changed = True
        groups = out
    return groups
