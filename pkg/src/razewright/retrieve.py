"""Query-time retrieval: embed the query, gather candidate passages, and
assemble the generation prompt.

Four modes. `naive` is plain vector search. `local` matches LLM-extracted
low-level keywords against entity names and pulls those entities' source
chunks; `global` matches high-level keywords against relation keywords and
pulls the relations' and endpoints' chunks. `hybrid` unions the vector hits
with both graph candidate sets and re-ranks everything by cosine, so with an
empty graph it degrades to exactly the naive result.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .errors import EmptyStore, InvalidInput, ProviderError, TemplateError
from .index import Entity, IndexStore, Relation
from .metrics import tokenize
from .providers import ChatProvider, EmbeddingProvider, EmbeddingVector, cosine, user_request
from . import templates

DEFAULT_TOP_K = 10
DEFAULT_CONTEXT_BUDGET = 6000


class RetrievalMode(str, Enum):
    NAIVE = "naive"
    LOCAL = "local"
    GLOBAL = "global"
    HYBRID = "hybrid"


@dataclass
class Query:
    text: str
    mode: RetrievalMode = RetrievalMode.HYBRID
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        self.mode = RetrievalMode(self.mode)
        if not self.text:
            raise InvalidInput("query text must be non-empty")
        if self.top_k < 1:
            raise InvalidInput("top_k must be positive")


class ScoredChunk(NamedTuple):
    chunk_id: str
    text: str
    score: float


@dataclass
class ContextBundle:
    chunks: list[ScoredChunk] = field(default_factory=list)
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    rendered: str = ""


def extract_query_keywords(
    query: Query, llm: ChatProvider, template: str | None = None, model: str = ""
) -> tuple[list[str], list[str]]:
    """LLM-suggested (low-level, high-level) keyword lists for the query.

    A reply without the LOW/HIGH markers degrades to (tokenized query terms,
    []) rather than failing.
    """
    template = template or templates.DEFAULTS["keywords"]
    reply = llm.chat(user_request(model, template.replace("{query}", query.text), temperature=0.0))
    upper = reply.upper()
    if "LOW" not in upper and "HIGH" not in upper:
        return list(tokenize(query.text).tokens), []
    return _parse_keyword_reply(reply)


def _parse_keyword_reply(reply: str) -> tuple[list[str], list[str]]:
    def section(name: str) -> list[str]:
        upper = reply.upper()
        marker = name + ":"
        pos = upper.find(marker)
        if pos < 0:
            return []
        rest = reply[pos + len(marker) :]
        for stop in ("|", "\n"):
            cut = rest.find(stop)
            if cut >= 0:
                rest = rest[:cut]
        return [term.strip() for term in rest.split(",") if term.strip()]

    return section("LOW"), section("HIGH")


def _score_chunks(store: IndexStore, chunk_ids: set[str], query_vec: EmbeddingVector) -> list[ScoredChunk]:
    scored = []
    for cid in chunk_ids:
        rec = store.vectors.get(cid)
        if rec is None:
            continue
        scored.append(ScoredChunk(cid, rec.text, cosine(rec.vector, query_vec)))
    scored.sort(key=lambda c: (-c.score, c.chunk_id))
    return scored


def _match_entities(store: IndexStore, keywords: list[str]) -> list[Entity]:
    """Case-insensitive substring match of keywords against entity names."""
    needles = [k.casefold() for k in keywords if k]
    hits = []
    for name in sorted(store.graph.entities):
        if any(needle in name for needle in needles):
            hits.append(store.graph.entities[name])
    return hits


def _match_relations(store: IndexStore, keywords: list[str]) -> list[Relation]:
    """Case-insensitive substring match of keywords against relation keywords."""
    needles = [k.casefold() for k in keywords if k]
    hits = []
    for rel in store.graph.relations:
        haystacks = [kw.casefold() for kw in rel.keywords]
        if any(needle in hay for needle in needles for hay in haystacks):
            hits.append(rel)
    return hits


def retrieve(
    query: Query,
    store: IndexStore,
    embedder: EmbeddingProvider,
    llm: ChatProvider | None = None,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    keyword_template: str | None = None,
) -> ContextBundle:
    """Build the context bundle for a query under its retrieval mode."""
    if len(store.vectors) == 0:
        raise EmptyStore("index has no vectors")
    query_vec = embedder.embed([query.text])[0]

    low: list[str] = []
    high: list[str] = []
    if query.mode is not RetrievalMode.NAIVE:
        if llm is None:
            raise ProviderError(f"{query.mode.value} retrieval requires a chat provider for keywords")
        low, high = extract_query_keywords(query, llm, template=keyword_template)

    naive_hits = [
        ScoredChunk(cid, store.vectors.get(cid).text, score)
        for cid, score in store.vectors.knn(query_vec, query.top_k)
    ]

    entities: list[Entity] = []
    relations: list[Relation] = []
    if query.mode is RetrievalMode.NAIVE:
        chunks = naive_hits
    elif query.mode is RetrievalMode.LOCAL:
        entities = _match_entities(store, low)
        candidate_ids = set().union(*(e.source_chunk_ids for e in entities)) if entities else set()
        chunks = _score_chunks(store, candidate_ids, query_vec)[: query.top_k]
    elif query.mode is RetrievalMode.GLOBAL:
        relations = _match_relations(store, high)
        entities = _relation_endpoints(store, relations)
        candidate_ids = _global_candidate_ids(entities, relations)
        chunks = _score_chunks(store, candidate_ids, query_vec)[: query.top_k]
    else:  # hybrid: vector hits ∪ local candidates ∪ global candidates, re-ranked
        local_entities = _match_entities(store, low)
        relations = _match_relations(store, high)
        global_entities = _relation_endpoints(store, relations)
        entities = _dedup_entities(local_entities + global_entities)
        candidate_ids = {c.chunk_id for c in naive_hits}
        if local_entities:
            candidate_ids |= set().union(*(e.source_chunk_ids for e in local_entities))
        candidate_ids |= _global_candidate_ids(global_entities, relations)
        chunks = _score_chunks(store, candidate_ids, query_vec)[: query.top_k]

    bundle = ContextBundle(chunks=chunks, entities=entities, relations=relations)
    bundle.rendered = render_context(bundle, context_budget)
    return bundle


def _relation_endpoints(store: IndexStore, relations: list[Relation]) -> list[Entity]:
    seen: list[Entity] = []
    for rel in relations:
        for name in (rel.src, rel.dst):
            ent = store.graph.entities.get(name)
            if ent is not None and ent not in seen:
                seen.append(ent)
    return seen


def _global_candidate_ids(entities: list[Entity], relations: list[Relation]) -> set[str]:
    ids: set[str] = set()
    for rel in relations:
        ids |= rel.source_chunk_ids
    for ent in entities:
        ids |= ent.source_chunk_ids
    return ids


def _dedup_entities(entities: list[Entity]) -> list[Entity]:
    out: list[Entity] = []
    seen: set[str] = set()
    for ent in entities:
        if ent.name not in seen:
            seen.add(ent.name)
            out.append(ent)
    return out


def render_context(bundle: ContextBundle, budget: int = DEFAULT_CONTEXT_BUDGET) -> str:
    """Sections Entities / Relations / Passages in fixed order; when over the
    character budget, lowest-scored passages drop first."""
    chunks = list(bundle.chunks)
    while True:
        rendered = _render_sections(bundle.entities, bundle.relations, chunks)
        if len(rendered) <= budget or not chunks:
            return rendered
        chunks = chunks[:-1]  # lowest-scored passage drops first


def _render_sections(entities, relations, chunks) -> str:
    lines: list[str] = []
    lines.append("Entities:")
    for ent in entities:
        lines.append(f"- {ent.name} ({ent.etype}): {ent.description}")
    lines.append("")
    lines.append("Relations:")
    for rel in relations:
        lines.append(f"- {rel.src} -> {rel.dst} [{', '.join(rel.keywords)}]: {rel.description}")
    lines.append("")
    lines.append("Passages:")
    for chunk in chunks:
        lines.append(f"[{chunk.chunk_id}] {chunk.text}")
    return "\n".join(lines)


_PLACEHOLDER_RE = re.compile(r"\{(context|query)\}")


def assemble_prompt(query: Query, ctx: ContextBundle, template: str) -> str:
    """Substitute {context} and {query} into the answer template.

    Single-pass substitution: placeholder-shaped text arriving inside the
    retrieved context or the query is never re-expanded.
    """
    for placeholder in ("{context}", "{query}"):
        if placeholder not in template:
            raise TemplateError(f"template missing placeholder {placeholder}")
    mapping = {"context": ctx.rendered, "query": query.text}
    return _PLACEHOLDER_RE.sub(lambda m: mapping[m.group(1)], template)
