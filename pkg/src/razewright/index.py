"""Vector store with exact top-k search and a lightweight knowledge graph.

The graph is built by prompting a chat model to emit one record per line in
a fixed delimiter format (`ENTITY<|>...` / `RELATION<|>...`); anything that
does not parse is skipped and counted, never fatal. Retrieval-time scoring is
exact cosine over every stored vector: at this corpus scale approximate
indexes buy nothing.

Persistence layout (one directory per index):
    meta.json       format_version, dim, embedding model name
    vectors.jsonl   chunk_id, dim, values, text
    entities.jsonl  name, etype, description, source_chunk_ids
    relations.jsonl src, dst, keywords, description, weight, source_chunk_ids
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Chunk
from .errors import DimMismatch, EmptyStore, FormatVersionError, InvalidInput
from .providers import ChatProvider, EmbeddingVector, cosine, user_request

FORMAT_VERSION = 1
RECORD_DELIM = "<|>"


@dataclass(frozen=True)
class VectorRecord:
    chunk_id: str
    vector: EmbeddingVector
    text: str


@dataclass
class Entity:
    name: str
    etype: str
    description: str
    source_chunk_ids: set[str]


@dataclass
class Relation:
    src: str
    dst: str
    keywords: list[str]
    description: str
    weight: float
    source_chunk_ids: set[str]


def normalize_name(name: str) -> str:
    """Casefold and collapse whitespace; the graph's entity key."""
    return re.sub(r"\s+", " ", name).strip().casefold()


class VectorStore:
    """chunk_id -> vector/text map with exact cosine kNN."""

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._records: dict[str, VectorRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._records

    def get(self, chunk_id: str) -> VectorRecord | None:
        return self._records.get(chunk_id)

    def records(self) -> list[VectorRecord]:
        return [self._records[k] for k in sorted(self._records)]

    def upsert(self, records: Sequence[VectorRecord]) -> int:
        """Insert or replace by chunk_id; returns how many records were written."""
        for rec in records:
            if self.dim is None:
                self.dim = rec.vector.dim
            if rec.vector.dim != self.dim:
                raise DimMismatch(f"record {rec.chunk_id}: dim {rec.vector.dim} != store dim {self.dim}")
        for rec in records:
            self._records[rec.chunk_id] = rec
        return len(records)

    def knn(self, query: EmbeddingVector, k: int) -> list[tuple[str, float]]:
        """Top-k by exact cosine, descending; ties broken by ascending chunk_id."""
        if k < 1:
            raise InvalidInput("k must be positive")
        if not self._records:
            raise EmptyStore("vector store is empty")
        if self.dim is not None and query.dim != self.dim:
            raise DimMismatch(f"query dim {query.dim} != store dim {self.dim}")
        scored = [(cid, cosine(rec.vector, query)) for cid, rec in self._records.items()]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[:k]


class KnowledgeGraph:
    """Entities keyed by normalized name; relations keep insertion order."""

    def __init__(self):
        self.entities: dict[str, Entity] = {}
        self.relations: list[Relation] = []

    def __bool__(self) -> bool:
        return bool(self.entities) or bool(self.relations)

    def add_entity(self, name: str, etype: str, description: str, chunk_ids: Iterable[str]):
        key = normalize_name(name)
        if not key:
            raise InvalidInput("entity name is empty after normalization")
        existing = self.entities.get(key)
        if existing is None:
            self.entities[key] = Entity(key, etype, description, set(chunk_ids))
        else:
            existing.source_chunk_ids.update(chunk_ids)
            if description and description not in existing.description:
                existing.description = (
                    f"{existing.description}; {description}" if existing.description else description
                )
            if existing.etype == "unknown" and etype != "unknown":
                existing.etype = etype

    def add_relation(
        self,
        src: str,
        dst: str,
        keywords: Sequence[str],
        description: str,
        weight: float,
        chunk_ids: Iterable[str],
    ):
        """Insert a relation; unknown endpoints get stub entities so the graph
        never references a missing node."""
        src_key, dst_key = normalize_name(src), normalize_name(dst)
        if not src_key or not dst_key or src_key == dst_key:
            raise InvalidInput("relation endpoints must be distinct, non-empty names")
        chunk_ids = set(chunk_ids)
        for endpoint in (src_key, dst_key):
            if endpoint not in self.entities:
                self.add_entity(endpoint, "unknown", "", chunk_ids)
            else:
                self.entities[endpoint].source_chunk_ids.update(chunk_ids)
        self.relations.append(
            Relation(src_key, dst_key, [k for k in keywords if k], description, weight, chunk_ids)
        )


@dataclass
class ExtractionResult:
    entities: list[Entity] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    skipped: int = 0


def parse_extraction_reply(reply: str, chunk_id: str) -> ExtractionResult:
    """Parse `ENTITY<|>name<|>type<|>description` and
    `RELATION<|>src<|>dst<|>kw1,kw2<|>description<|>weight` lines.

    Duplicate entity names merge with joined descriptions; malformed or
    off-format lines only bump the skip counter.
    """
    result = ExtractionResult()
    seen: dict[str, Entity] = {}
    for line in reply.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(RECORD_DELIM)]
        tag = parts[0].upper()
        if tag == "ENTITY" and len(parts) == 4:
            name = normalize_name(parts[1])
            if not name:
                result.skipped += 1
                continue
            if name in seen:
                prior = seen[name]
                if parts[3] and parts[3] not in prior.description:
                    prior.description = (
                        f"{prior.description}; {parts[3]}" if prior.description else parts[3]
                    )
            else:
                entity = Entity(name, parts[2] or "unknown", parts[3], {chunk_id})
                seen[name] = entity
                result.entities.append(entity)
        elif tag == "RELATION" and len(parts) == 6:
            src, dst = normalize_name(parts[1]), normalize_name(parts[2])
            try:
                weight = float(parts[5])
            except ValueError:
                result.skipped += 1
                continue
            if not src or not dst or src == dst or weight < 0:
                result.skipped += 1
                continue
            keywords = [k.strip() for k in parts[3].split(",") if k.strip()]
            result.relations.append(Relation(src, dst, keywords, parts[4], weight, {chunk_id}))
        else:
            result.skipped += 1
    return result


def extract_graph(chunk: Chunk, llm: ChatProvider, prompt_template: str, model: str = "") -> ExtractionResult:
    """Ask the model for entity/relation records over one chunk's text."""
    if not chunk.text:
        raise InvalidInput("chunk text is empty")
    prompt = prompt_template.replace("{text}", chunk.text)
    reply = llm.chat(user_request(model, prompt, temperature=0.0))
    return parse_extraction_reply(reply, chunk.chunk_id)


def merge_extraction(graph: KnowledgeGraph, result: ExtractionResult):
    """Fold one chunk's extraction into the shared graph."""
    for ent in result.entities:
        graph.add_entity(ent.name, ent.etype, ent.description, ent.source_chunk_ids)
    for rel in result.relations:
        graph.add_relation(
            rel.src, rel.dst, rel.keywords, rel.description, rel.weight, rel.source_chunk_ids
        )


@dataclass
class IndexStore:
    """The persisted retrieval unit: vectors plus graph plus metadata."""

    vectors: VectorStore = field(default_factory=VectorStore)
    graph: KnowledgeGraph = field(default_factory=KnowledgeGraph)
    embed_model: str = ""


def save_index(store: IndexStore, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "dim": store.vectors.dim,
        "embed_model": store.embed_model,
    }
    (path / "meta.json").write_text(json.dumps(meta, ensure_ascii=False), encoding="utf-8")
    with (path / "vectors.jsonl").open("w", encoding="utf-8") as fh:
        for rec in store.vectors.records():
            fh.write(
                json.dumps(
                    {
                        "chunk_id": rec.chunk_id,
                        "dim": rec.vector.dim,
                        "values": list(rec.vector.values),
                        "text": rec.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with (path / "entities.jsonl").open("w", encoding="utf-8") as fh:
        for key in sorted(store.graph.entities):
            ent = store.graph.entities[key]
            fh.write(
                json.dumps(
                    {
                        "name": ent.name,
                        "etype": ent.etype,
                        "description": ent.description,
                        "source_chunk_ids": sorted(ent.source_chunk_ids),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with (path / "relations.jsonl").open("w", encoding="utf-8") as fh:
        for rel in store.graph.relations:
            fh.write(
                json.dumps(
                    {
                        "src": rel.src,
                        "dst": rel.dst,
                        "keywords": rel.keywords,
                        "description": rel.description,
                        "weight": rel.weight,
                        "source_chunk_ids": sorted(rel.source_chunk_ids),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return path


def load_index(path: str | Path) -> IndexStore:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise OSError(f"not an index directory (no meta.json): {path}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"unsupported index format version: {version!r}")
    store = IndexStore(embed_model=meta.get("embed_model", ""))
    store.vectors.dim = meta.get("dim")
    records = []
    for line in _read_jsonl(path / "vectors.jsonl"):
        records.append(
            VectorRecord(
                chunk_id=line["chunk_id"],
                vector=EmbeddingVector(tuple(float(v) for v in line["values"])),
                text=line["text"],
            )
        )
    if records:
        store.vectors.upsert(records)
    for line in _read_jsonl(path / "entities.jsonl"):
        store.graph.add_entity(
            line["name"], line["etype"], line["description"], set(line["source_chunk_ids"])
        )
    for line in _read_jsonl(path / "relations.jsonl"):
        store.graph.add_relation(
            line["src"],
            line["dst"],
            line["keywords"],
            line["description"],
            float(line["weight"]),
            set(line["source_chunk_ids"]),
        )
    return store


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").split("\n") if line.strip()]
