"""Stateless semantic search: one query in, ranked block list out.

Candidates come from the same hybrid retrieval pipeline the chat agent
uses (text spans plus images); a provider call then selects and orders the
individual blocks worth showing.  The filter may only choose from the
presented candidates: ids it invents are dropped.  If the filter call fails
or returns garbage, the hybrid-score order stands in, so a search never
fails outright once retrieval succeeded.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .blocks import BlockKind
from .errors import GatewayError, ValidationError
from .retrieval import HybridRetriever, RetrievalConfig, postprocess_text

if TYPE_CHECKING:
    from .index import DocumentIndex

LOGGER = logging.getLogger(__name__)

SNIPPET_CHARS = 200

_FILTER_SYSTEM = (
    "You rank search results for a learner. From the numbered candidate "
    "blocks, pick the ones that answer the query and order them most "
    "relevant first. Reply with only a JSON array of candidate keys, e.g. "
    '["doc:12", "doc:40"]. Use only keys shown in the candidate list.'
)


@dataclass(frozen=True)
class NavigationResult:
    rank: int
    doc_id: str
    block_id: int
    kind: str
    page: int
    bbox: list[float]
    snippet: str


def doc_search(
    query: str,
    index: "DocumentIndex",
    gateway,
    config: RetrievalConfig | None = None,
) -> list[NavigationResult]:
    """Run one stateless document search.

    Returns at most config.docsearch_k results with contiguous ranks from 1.
    Raises ValidationError for an empty query.
    """
    if not query or not query.strip():
        raise ValidationError("search query must not be empty")
    config = config or RetrievalConfig()
    retriever = HybridRetriever(index, gateway, config)

    spans = postprocess_text(retriever.search_text(query, config.content_text_k), index)
    images = retriever.search_images(query, config.content_image_k)

    # Candidate groups keep their hybrid score for the fallback ordering.
    groups: list[tuple[float, tuple, list[tuple[str, int]]]] = []
    for span in spans:
        groups.append(
            (span.hybrid_score, (span.doc_id, span.first_block_id), [(span.doc_id, b) for b in span.block_ids])
        )
    for image in images:
        groups.append((image.hybrid_score, (image.doc_id, image.block_id), [(image.doc_id, image.block_id)]))

    fallback: list[tuple[str, int]] = []
    seen: set[tuple[str, int]] = set()
    for _, _, members in sorted(groups, key=lambda g: (-g[0], g[1])):
        for key in members:
            if key not in seen:
                seen.add(key)
                fallback.append(key)

    candidates = {f"{doc}:{block}": (doc, block) for doc, block in fallback}
    chosen = _filter_with_provider(query, candidates, index, gateway)
    if chosen is None:
        chosen = fallback

    results = []
    for doc_id, block_id in chosen[: config.docsearch_k]:
        block = index.get_block(doc_id, block_id)
        if block.kind is BlockKind.FIGURE:
            snippet = index.get_image_record(doc_id, block_id).caption
        else:
            snippet = block.text[:SNIPPET_CHARS]
        results.append(
            NavigationResult(
                rank=len(results) + 1,
                doc_id=doc_id,
                block_id=block_id,
                kind=block.kind.value,
                page=block.page,
                bbox=block.bbox.as_list(),
                snippet=snippet,
            )
        )
    return results


def _filter_with_provider(
    query: str,
    candidates: dict[str, tuple[str, int]],
    index: "DocumentIndex",
    gateway,
) -> list[tuple[str, int]] | None:
    """Ask the provider to select/order candidates. None means: fall back."""
    if not candidates:
        return []
    lines = []
    for key, (doc_id, block_id) in candidates.items():
        block = index.get_block(doc_id, block_id)
        if block.kind is BlockKind.FIGURE:
            preview = "figure: " + index.get_image_record(doc_id, block_id).caption
        else:
            preview = block.text[:SNIPPET_CHARS]
        lines.append(f"{key} [{block.kind.value}] {preview}")
    prompt = f"Query: {query}\n\nCandidates:\n" + "\n".join(lines)
    try:
        reply = gateway.chat(
            [
                {"role": "system", "content": _FILTER_SYSTEM},
                {"role": "user", "content": prompt},
            ]
        )
    except GatewayError as exc:
        LOGGER.warning("docsearch filter call failed (%s); using hybrid order", exc)
        return None
    if reply.text is None:
        LOGGER.warning("docsearch filter returned no text; using hybrid order")
        return None
    try:
        parsed = json.loads(reply.text)
    except ValueError:
        LOGGER.warning("docsearch filter reply was not JSON; using hybrid order")
        return None
    if not isinstance(parsed, list) or not all(isinstance(item, str) for item in parsed):
        LOGGER.warning("docsearch filter reply was not a list of keys; using hybrid order")
        return None
    chosen: list[tuple[str, int]] = []
    used: set[str] = set()
    for key in parsed:
        if key in candidates and key not in used:
            used.add(key)
            chosen.append(candidates[key])
        elif key not in candidates:
            LOGGER.info("docsearch filter invented key %r; dropped", key)
    return chosen
