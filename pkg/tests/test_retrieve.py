import json

import pytest

from razewright.errors import EmptyStore, InvalidInput, TemplateError
from razewright.index import IndexStore, VectorRecord
from razewright.providers import HashEmbedder, MockChatProvider, cosine
from razewright.retrieve import (
    ContextBundle,
    Query,
    RetrievalMode,
    ScoredChunk,
    assemble_prompt,
    extract_query_keywords,
    render_context,
    retrieve,
)


@pytest.fixture
def embedder():
    return HashEmbedder(dim=32, seed=1)


@pytest.fixture
def store(embedder):
    texts = {
        "doc:0000": "bearing capacity of the support area must not drop suddenly",
        "doc:0001": "strain monitoring points near the grid center show deviations",
        "doc:0002": "temporary supports stabilize the structure during removal",
    }
    store = IndexStore(embed_model="mock")
    records = [
        VectorRecord(cid, embedder.embed([text])[0], text) for cid, text in texts.items()
    ]
    store.vectors.upsert(records)
    return store


def add_graph(store):
    store.graph.add_entity("bearing", "component", "support bearing", {"doc:0000"})
    store.graph.add_entity("strain gauge", "instrument", "monitoring device", {"doc:0001"})
    store.graph.add_relation(
        "bearing", "strain gauge", ["demolition safety"], "monitored during removal", 1.0, {"doc:0002"}
    )
    return store


def keyword_llm(reply="LOW: bearing | HIGH: demolition safety"):
    return MockChatProvider(default=reply)


# --- keyword extraction -------------------------------------------------------


def test_keywords_parsed_from_structured_reply():
    low, high = extract_query_keywords(
        Query("q", "naive"), MockChatProvider(default="LOW: bearing, strain | HIGH: demolition safety")
    )
    assert low == ["bearing", "strain"]
    assert high == ["demolition safety"]


def test_keywords_degrade_to_query_tokens():
    low, high = extract_query_keywords(
        Query("grid stress", "naive"), MockChatProvider(default="no markers in this prose")
    )
    assert low == ["grid", "stress"]
    assert high == []


def test_keywords_empty_sections():
    low, high = extract_query_keywords(Query("q", "naive"), MockChatProvider(default="LOW: | HIGH:"))
    assert low == [] and high == []


# --- retrieve modes -------------------------------------------------------------


def test_naive_matches_bruteforce_cosine(store, embedder):
    query = Query("monitoring strain near the grid", mode="naive", top_k=2)
    bundle = retrieve(query, store, embedder)
    qv = embedder.embed([query.text])[0]
    brute = sorted(
        ((rec.chunk_id, cosine(rec.vector, qv)) for rec in store.vectors.records()),
        key=lambda p: (-p[1], p[0]),
    )[:2]
    assert [(c.chunk_id, c.score) for c in bundle.chunks] == brute
    assert bundle.entities == [] and bundle.relations == []


def test_scores_descending_and_topk_truncates(store, embedder):
    bundle = retrieve(Query("support", "naive", top_k=1), store, embedder)
    assert len(bundle.chunks) == 1
    bundle3 = retrieve(Query("support", "naive", top_k=3), store, embedder)
    scores = [c.score for c in bundle3.chunks]
    assert scores == sorted(scores, reverse=True)


def test_local_mode_pulls_entity_chunks(store, embedder):
    add_graph(store)
    bundle = retrieve(Query("bearing state", "local"), store, embedder, llm=keyword_llm())
    assert [e.name for e in bundle.entities] == ["bearing"]
    # bearing entity sources doc:0000 plus the relation's doc:0002 merge
    assert {c.chunk_id for c in bundle.chunks} == {"doc:0000", "doc:0002"}


def test_global_mode_pulls_relation_chunks(store, embedder):
    add_graph(store)
    bundle = retrieve(Query("safety themes", "global"), store, embedder, llm=keyword_llm())
    assert [r.description for r in bundle.relations] == ["monitored during removal"]
    assert {e.name for e in bundle.entities} == {"bearing", "strain gauge"}
    assert {c.chunk_id for c in bundle.chunks} == {"doc:0000", "doc:0001", "doc:0002"}


def test_hybrid_superset_of_local_and_global(store, embedder):
    add_graph(store)
    query_text = "bearing monitoring during demolition"
    local = retrieve(Query(query_text, "local", top_k=10), store, embedder, llm=keyword_llm())
    global_ = retrieve(Query(query_text, "global", top_k=10), store, embedder, llm=keyword_llm())
    hybrid = retrieve(Query(query_text, "hybrid", top_k=10), store, embedder, llm=keyword_llm())
    hybrid_ids = {c.chunk_id for c in hybrid.chunks}
    assert {c.chunk_id for c in local.chunks} <= hybrid_ids
    assert {c.chunk_id for c in global_.chunks} <= hybrid_ids


def test_hybrid_with_empty_graph_equals_naive(store, embedder):
    query_text = "temporary supports for the structure"
    naive = retrieve(Query(query_text, "naive", top_k=2), store, embedder)
    hybrid = retrieve(Query(query_text, "hybrid", top_k=2), store, embedder, llm=keyword_llm())
    assert hybrid.chunks == naive.chunks


def test_retrieve_deterministic(store, embedder):
    add_graph(store)

    def run():
        bundle = retrieve(Query("bearing safety", "hybrid"), store, embedder, llm=keyword_llm())
        return json.dumps(
            {
                "chunks": [list(c) for c in bundle.chunks],
                "entities": [e.name for e in bundle.entities],
                "rendered": bundle.rendered,
            }
        )

    assert run() == run()


def test_retrieve_empty_store_errors(embedder):
    with pytest.raises(EmptyStore):
        retrieve(Query("q", "naive"), IndexStore(), embedder)


# --- rendering and prompt assembly -----------------------------------------------


def test_render_fixed_section_order(store, embedder):
    add_graph(store)
    bundle = retrieve(Query("bearing", "hybrid"), store, embedder, llm=keyword_llm())
    rendered = bundle.rendered
    assert rendered.index("Entities:") < rendered.index("Relations:") < rendered.index("Passages:")


def test_render_budget_drops_lowest_scored_first():
    chunks = [
        ScoredChunk("c1", "x" * 50, 0.9),
        ScoredChunk("c2", "y" * 50, 0.5),
        ScoredChunk("c3", "z" * 50, 0.1),
    ]
    bundle = ContextBundle(chunks=chunks)
    full = render_context(bundle, budget=10_000)
    assert "z" * 50 in full
    trimmed = render_context(bundle, budget=len(full) - 1)
    assert "z" * 50 not in trimmed
    assert "x" * 50 in trimmed


def test_assemble_prompt_substitution():
    ctx = ContextBundle(rendered="X")
    assert assemble_prompt(Query("Y", "naive"), ctx, "C:{context}\nQ:{query}") == "C:X\nQ:Y"


def test_assemble_prompt_missing_placeholder():
    with pytest.raises(TemplateError):
        assemble_prompt(Query("Y", "naive"), ContextBundle(), "C:{context} only")


def test_assemble_prompt_empty_context_ok():
    out = assemble_prompt(Query("Y", "naive"), ContextBundle(rendered=""), "C:{context}|Q:{query}")
    assert out == "C:|Q:Y"


def test_assemble_prompt_does_not_reexpand_context():
    ctx = ContextBundle(rendered="sneaky {query} inside")
    out = assemble_prompt(Query("Y", "naive"), ctx, "C:{context}|Q:{query}")
    assert out == "C:sneaky {query} inside|Q:Y"


def test_assemble_prompt_contains_query_verbatim(store, embedder):
    query = Query("what about 拆除 safety?", "naive")
    bundle = retrieve(query, store, embedder)
    from razewright.templates import DEFAULTS

    prompt = assemble_prompt(query, bundle, DEFAULTS["answer"])
    assert query.text in prompt
    assert bundle.chunks[0].text in prompt


def test_query_validation():
    with pytest.raises(InvalidInput):
        Query("", "naive")
    with pytest.raises(ValueError):
        Query("x", "sideways")
    with pytest.raises(InvalidInput):
        Query("x", "naive", top_k=0)
