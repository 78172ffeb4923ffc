"""BM25, score fusion, ranking, and span post-processing."""

from __future__ import annotations

import random

import numpy as np
import pytest

from conftest import VectorGateway, assemble_index, make_chunk, text_block, unit
from oracles import (
    brute_force_hybrid_order,
    check_spans,
    reference_bm25,
    reference_cosine,
    reference_normalize,
)
from mudoc.blocks import ImageRecord
from mudoc.errors import ValidationError
from mudoc.retrieval import (
    Bm25Corpus,
    HybridRetriever,
    RetrievalConfig,
    ScoredChunk,
    cosine,
    min_max_normalize,
    postprocess_text,
    tokenize,
)

WORDS = ["cell", "membrane", "osmosis", "enzyme", "gradient", "protein", "nucleus", "ion"]


def test_tokenize_lowercases_and_splits_on_non_word():
    assert tokenize("Hello, World! x2") == ["hello", "world", "x2"]
    assert tokenize("") == []
    assert tokenize("...") == []


def test_config_rejects_bad_weights_and_parameters():
    with pytest.raises(ValidationError):
        RetrievalConfig(text_dense_weight=0.9, text_sparse_weight=0.2).validate()
    with pytest.raises(ValidationError):
        RetrievalConfig(bm25_b=1.5).validate()
    with pytest.raises(ValidationError):
        RetrievalConfig(pool_size=0).validate()
    RetrievalConfig().validate()


# -- BM25 -----------------------------------------------------------------------


HAND_CORPUS = [["a", "b"], ["a", "a", "c"], ["d"]]


def test_bm25_hand_corpus_frozen_values():
    corpus = Bm25Corpus(HAND_CORPUS)
    # "a" appears in 2 of 3 docs, so its IDF hits the zero floor everywhere.
    assert corpus.scores(["a"]) == [0.0, 0.0, 0.0]
    assert corpus.scores(["d"]) == pytest.approx([0.0, 0.0, 0.6421807841629599], abs=1e-12)
    assert corpus.scores(["c"]) == pytest.approx([0.0, 0.42408164991893577, 0.0], abs=1e-12)
    # each query-term occurrence contributes separately
    assert corpus.score(["d", "d"], 2) == pytest.approx(1.2843615683259197, abs=1e-12)
    assert corpus.score(["a", "d"], 2) == pytest.approx(0.6421807841629599, abs=1e-12)


def test_bm25_empty_corpus_and_absent_terms():
    empty = Bm25Corpus([])
    assert empty.scores(["a"]) == []
    assert empty.idf("a") == 0.0
    corpus = Bm25Corpus(HAND_CORPUS)
    assert corpus.score([], 0) == 0.0
    assert corpus.score(["zzz"], 0) == 0.0


def test_bm25_matches_reference_on_random_corpora():
    rng = random.Random(2112)
    for _ in range(25):
        corpus_tokens = [
            [rng.choice(WORDS) for _ in range(rng.randint(1, 12))]
            for _ in range(rng.randint(1, 10))
        ]
        corpus = Bm25Corpus(corpus_tokens)
        for _ in range(5):
            query = [rng.choice(WORDS) for _ in range(rng.randint(1, 4))]
            for i, doc in enumerate(corpus_tokens):
                assert corpus.score(query, i) == pytest.approx(
                    reference_bm25(query, doc, corpus_tokens), abs=1e-9
                )


def test_bm25_round_trips_through_dict():
    corpus = Bm25Corpus(HAND_CORPUS, k1=1.4, b=0.6)
    restored = Bm25Corpus.from_dict(corpus.to_dict())
    assert restored.k1 == 1.4 and restored.b == 0.6
    assert restored.scores(["a", "c", "d"]) == corpus.scores(["a", "c", "d"])
    assert restored.df == corpus.df


# -- normalization and cosine ------------------------------------------------------


def test_min_max_normalize_edges():
    assert min_max_normalize([]) == []
    assert min_max_normalize([5.0]) == [1.0]
    assert min_max_normalize([3.0, 3.0, 3.0]) == [1.0, 1.0, 1.0]
    assert min_max_normalize([1.0, 3.0]) == [0.0, 1.0]
    assert min_max_normalize([2.0, 1.0, 3.0]) == [0.5, 0.0, 1.0]
    assert min_max_normalize([4.0, 2.0]) == reference_normalize([4.0, 2.0])


def test_cosine_matches_reference():
    a = np.array([1.0, 0.0, 2.0])
    b = np.array([0.5, 1.0, 0.0])
    assert cosine(a, b) == pytest.approx(reference_cosine([1.0, 0.0, 2.0], [0.5, 1.0, 0.0]))
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine(np.array([2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert cosine(np.array([0.0, 0.0]), np.array([1.0, 0.0])) == 0.0


# -- fused ranking ------------------------------------------------------------------


def test_rank_breaks_exact_ties_by_block_id():
    # dyadic raw scores keep the tie exact in floating point:
    # c1 = .75*.5 + .25*1 = .625 and c2 = .75*.75 + .25*.25 = .625
    pool = [0, 1, 2, 3]
    dense = [0.0, 0.5, 0.75, 1.0]
    sparse = [0.0, 1.0, 0.25, 0.0]
    tie_keys = [(4, "bio"), (7, "bio"), (2, "bio"), (5, "bio")]
    ranked = HybridRetriever._rank(pool, dense, sparse, 0.75, 0.25, tie_keys)
    assert [i for i, _ in ranked] == [3, 2, 1, 0]
    assert ranked[1][1] == ranked[2][1] == 0.625


def test_rank_breaks_block_ties_by_doc_id():
    pool = [0, 1]
    ranked = HybridRetriever._rank(pool, [1.0, 1.0], [0.0, 0.0], 0.75, 0.25, [(2, "beta"), (2, "alpha")])
    assert [i for i, _ in ranked] == [1, 0]


def test_rank_matches_brute_force_on_random_pools():
    rng = random.Random(1984)
    for _ in range(100):
        n = rng.randint(1, 30)
        dense = [rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(n)]
        sparse = [rng.choice([0.0, 0.5, 1.0, 2.0]) for _ in range(n)]
        keys = rng.sample([(b, d) for b in range(40) for d in ("a", "b")], n)
        pool = list(range(n))
        ranked = HybridRetriever._rank(pool, dense, sparse, 0.75, 0.25, keys)
        expected = brute_force_hybrid_order(list(zip(keys, dense, sparse)), 0.75, 0.25)
        assert [keys[i] for i, _ in ranked] == expected


def test_single_candidate_pool_scores_one():
    ranked = HybridRetriever._rank([0], [0.2], [3.0], 0.75, 0.25, [(0, "bio")])
    assert ranked == [(0, 1.0)]


# -- index-backed search -------------------------------------------------------------


def tiny_text_index(vectors: dict[str, list[float]], texts: list[str]):
    """One doc, one block per chunk, preset embeddings."""
    blocks = [text_block("bio", i, texts[i]) for i in range(len(texts))]
    chunks = [
        make_chunk("bio", i, [blocks[i]], summary=f"summary {i}",
                   content_vector=vectors[texts[i]], summary_vector=vectors[f"summary {i}"])
        for i in range(len(texts))
    ]
    index = assemble_index({"bio": (1, blocks)}, chunks)
    return index, chunks


def test_search_text_prefers_dense_match():
    e = lambda i: unit([1.0 if j == i else 0.0 for j in range(4)])
    texts = ["plain filler words", "the zebra paragraph", "other filler words"]
    vectors = {
        texts[0]: e(0), texts[1]: e(1), texts[2]: e(2),
        "summary 0": e(3), "summary 1": e(3), "summary 2": e(3),
        "zebra stripes": e(0),
    }
    index, _ = tiny_text_index(vectors, texts)
    gateway = VectorGateway(text_vectors=vectors)
    retriever = HybridRetriever(index, gateway)
    results = retriever.search_text("zebra stripes", k=3)
    # chunk 0 is the dense winner; at 0.75 dense weight it outranks the
    # sparse-only zebra chunk
    assert results[0].chunk_id == "bio:c0"
    assert results[0].dense_score == pytest.approx(1.0)
    assert results[1].chunk_id == "bio:c1"
    assert results[1].sparse_score > 0.0


def test_search_images_prefers_sparse_match():
    e = lambda i: [1.0 if j == i else 0.0 for j in range(4)]
    # three images keep the IDF of a one-hit term above the zero floor
    images = [
        ImageRecord("bio", 1, "ribosome detail diagram", "shows a ribosome",
                    image_vector=e(1), caption_vector=e(1), combined_vector=e(1)),
        ImageRecord("bio", 3, "unrelated sketch", "something else",
                    image_vector=e(0), caption_vector=e(0), combined_vector=e(0)),
        ImageRecord("bio", 5, "filler art", "decorative curve",
                    image_vector=e(2), caption_vector=e(2), combined_vector=e(2)),
    ]
    blocks = [text_block("bio", 0, "intro text")]
    chunks = [make_chunk("bio", 0, blocks, content_vector=unit(e(2)), summary_vector=unit(e(3)))]
    index = assemble_index(
        {"bio": (1, blocks)}, chunks, images,
        {("bio", 1): b"x", ("bio", 3): b"y", ("bio", 5): b"z"},
    )
    gateway = VectorGateway(text_vectors={}, image_text_vectors={"ribosome detail": e(0)})
    results = HybridRetriever(index, gateway).search_images("ribosome detail", k=3)
    # the caption/description match wins at 0.75 sparse weight even though
    # another image is the exact dense match
    assert [r.block_id for r in results] == [1, 3, 5]
    assert results[0].hybrid_score == pytest.approx(0.75)
    assert results[1].hybrid_score == pytest.approx(0.25)
    assert results[0].caption == "ribosome detail diagram"


def test_pool_union_includes_both_sides_and_nothing_else():
    e = lambda i: unit([1.0 if j == i else 0.0 for j in range(4)])
    texts = ["dense winner text", "the zebra paragraph", "middling text"]
    vectors = {
        texts[0]: e(0), texts[1]: e(1), texts[2]: e(2),
        "summary 0": e(3), "summary 1": e(3), "summary 2": e(3),
        "zebra query": e(0),
    }
    index, _ = tiny_text_index(vectors, texts)
    gateway = VectorGateway(text_vectors=vectors)
    retriever = HybridRetriever(index, gateway, RetrievalConfig(pool_size=1))
    results = retriever.search_text("zebra query", k=10)
    assert {r.chunk_id for r in results} == {"bio:c0", "bio:c1"}


def test_search_text_validates_k_and_handles_empty_index():
    index = assemble_index({"bio": (1, [text_block("bio", 0, "t")])}, [])
    retriever = HybridRetriever(index, VectorGateway())
    with pytest.raises(ValidationError):
        retriever.search_text("q", k=0)
    assert retriever.search_text("q", k=3) == []
    assert retriever.search_images("q", k=3) == []


def test_search_text_on_ingested_corpus(toy_index, mock_embedder):
    retriever = HybridRetriever(toy_index, mock_embedder)
    results = retriever.search_text("mitosis explained step by step", k=4)
    assert len(results) == 4
    hybrids = [r.hybrid_score for r in results]
    assert hybrids == sorted(hybrids, reverse=True)
    assert all(0.0 <= h <= 1.0 + 1e-12 for h in hybrids)
    top = toy_index.get_chunk(results[0].chunk_id)
    assert "mitosis" in top.text


def test_search_text_index_bm25_matches_reference(toy_index, mock_embedder):
    token_lists = [tokenize(f"{c.text}\n{c.summary}") for c in toy_index.chunks]
    query = ["mitosis", "enzyme", "gradient"]
    for i in range(len(token_lists)):
        assert toy_index.text_bm25.score(query, i) == pytest.approx(
            reference_bm25(query, token_lists[i], token_lists), abs=1e-9
        )


def test_search_images_on_ingested_corpus(toy_index, mock_embedder):
    retriever = HybridRetriever(toy_index, mock_embedder)
    results = retriever.search_images("diagram of the cell", k=5)
    assert len(results) == 4
    hybrids = [r.hybrid_score for r in results]
    assert hybrids == sorted(hybrids, reverse=True)


def test_search_is_deterministic(toy_index, mock_embedder):
    retriever = HybridRetriever(toy_index, mock_embedder)
    first = retriever.search_text("how enzymes work", k=5)
    second = retriever.search_text("how enzymes work", k=5)
    assert first == second


# -- span post-processing ---------------------------------------------------------


def span_fixture(block_texts: dict[int, str]):
    blocks = [text_block("bio", i, t) for i, t in sorted(block_texts.items())]
    return blocks


def scored(chunk_id: str, doc_id: str, first: int, hybrid: float) -> ScoredChunk:
    return ScoredChunk(
        chunk_id=chunk_id, doc_id=doc_id, first_block_id=first,
        dense_score=0.0, sparse_score=0.0, hybrid_score=hybrid,
    )


def overlapping_index():
    texts = {i: f"block {i} text" for i in range(7)}
    blocks = span_fixture(texts)
    v = unit([1.0, 0.0])
    chunks = [
        make_chunk("bio", 0, blocks[2:5], content_vector=v, summary_vector=v),  # blocks 2,3,4
        make_chunk("bio", 1, blocks[4:6], content_vector=v, summary_vector=v),  # blocks 4,5
        make_chunk("bio", 2, blocks[0:2], content_vector=v, summary_vector=v),  # blocks 0,1
    ]
    return assemble_index({"bio": (1, blocks)}, chunks)


def test_postprocess_merges_overlapping_chunks():
    index = overlapping_index()
    results = [scored("bio:c1", "bio", 4, 0.9), scored("bio:c0", "bio", 2, 0.4)]
    spans = postprocess_text(results, index)
    assert len(spans) == 1
    assert spans[0].block_ids == (2, 3, 4, 5)
    assert spans[0].text == "block 2 text\nblock 3 text\nblock 4 text\nblock 5 text"
    assert spans[0].chunk_ids == ("bio:c0", "bio:c1")
    assert spans[0].hybrid_score == 0.9
    check_spans(spans, [("bio", [4, 5]), ("bio", [2, 3, 4])])


def test_postprocess_keeps_disjoint_chunks_separate_in_reading_order():
    index = overlapping_index()
    results = [scored("bio:c0", "bio", 2, 0.5), scored("bio:c2", "bio", 0, 0.3)]
    spans = postprocess_text(results, index)
    assert [s.block_ids for s in spans] == [(0, 1), (2, 3, 4)]
    check_spans(spans, [("bio", [2, 3, 4]), ("bio", [0, 1])])


def test_postprocess_bridging_chunk_joins_groups():
    texts = {i: f"b{i}" for i in range(6)}
    blocks = span_fixture(texts)
    v = unit([1.0, 0.0])
    chunks = [
        make_chunk("bio", 0, blocks[0:2], content_vector=v, summary_vector=v),  # 0,1
        make_chunk("bio", 1, blocks[4:6], content_vector=v, summary_vector=v),  # 4,5
        make_chunk("bio", 2, blocks[1:5], content_vector=v, summary_vector=v),  # 1,2,3,4
    ]
    index = assemble_index({"bio": (1, blocks)}, chunks)
    results = [
        scored("bio:c0", "bio", 0, 0.2),
        scored("bio:c1", "bio", 4, 0.8),
        scored("bio:c2", "bio", 1, 0.5),
    ]
    spans = postprocess_text(results, index)
    assert len(spans) == 1
    assert spans[0].block_ids == (0, 1, 2, 3, 4, 5)
    assert spans[0].hybrid_score == 0.8
    check_spans(spans, [("bio", [0, 1]), ("bio", [4, 5]), ("bio", [1, 2, 3, 4])])


def test_postprocess_orders_documents_lexically():
    v = unit([1.0, 0.0])
    blocks_a = [text_block("alpha", 0, "a0")]
    blocks_z = [text_block("zeta", 0, "z0")]
    chunks = [
        make_chunk("zeta", 0, blocks_z, content_vector=v, summary_vector=v),
        make_chunk("alpha", 0, blocks_a, content_vector=v, summary_vector=v),
    ]
    index = assemble_index({"alpha": (1, blocks_a), "zeta": (1, blocks_z)}, chunks)
    results = [scored("zeta:c0", "zeta", 0, 0.9), scored("alpha:c0", "alpha", 0, 0.1)]
    spans = postprocess_text(results, index)
    assert [s.doc_id for s in spans] == ["alpha", "zeta"]


def test_postprocess_empty_results():
    assert postprocess_text([], overlapping_index()) == []
