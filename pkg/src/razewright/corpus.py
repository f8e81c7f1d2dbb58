"""Knowledge-base ingestion: text cleaning, chunking, and corpus loading.

Cleaning strips HTML tags, URLs, and control characters, then collapses
whitespace; the rules are idempotent and never lengthen the text. Chunking is
character-based with a fixed overlap so results do not depend on any
tokenizer. A corpus directory holds UTF-8 text files plus an optional
`manifest.tsv` with lines `filename<TAB>kind<TAB>title`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import EmptyDocument, InvalidInput, ManifestError

DEFAULT_CHUNK_SIZE = 800
DEFAULT_CHUNK_OVERLAP = 200

# zero-width and BOM characters stripped by default; CJK punctuation is kept
DEFAULT_STRIP_CHARS = "\u200b\u200c\u200d\u2060\ufeff"

_TAG_RE = re.compile(r"<[^>]*>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")


class DocKind(str, Enum):
    STANDARD = "standard"
    SCHEME = "scheme"
    RESEARCH_PAPER = "research_paper"
    PATENT = "patent"
    OTHER = "other"


@dataclass
class Document:
    id: str
    title: str
    kind: DocKind
    raw_text: str
    cleaned_text: str = ""


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    seq: int
    text: str
    char_start: int
    char_end: int

    @property
    def chunk_id(self) -> str:
        return f"{self.doc_id}:{self.seq:04d}"


def clean_text(raw: str, strip_chars: str = DEFAULT_STRIP_CHARS) -> str:
    """Strip tags/URLs/control characters and collapse whitespace.

    Idempotent and never longer than the input. Newlines and tabs become
    spaces; other control characters and `strip_chars` are dropped. Character
    dropping runs first so that an URL or tag split by a zero-width character
    cannot reassemble after the pattern passes have already run.
    """
    chars = []
    for ch in raw:
        if ch in ("\n", "\t", "\r"):
            chars.append(" ")
        elif ch in strip_chars:
            continue
        elif ch.isprintable() or ch.isspace():
            chars.append(ch)
        # remaining: non-printable controls, dropped
    text = _TAG_RE.sub(" ", "".join(chars))
    text = _URL_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def chunk_document(
    doc: Document,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Tile cleaned_text into chunks of `size` chars advancing by
    `size - overlap`; the final chunk ends exactly at the text end."""
    if size <= 0:
        raise InvalidInput("size must be positive")
    if overlap < 0 or overlap >= size:
        raise InvalidInput("overlap must satisfy 0 <= overlap < size")
    text = doc.cleaned_text
    if not text:
        raise EmptyDocument(f"document {doc.id} has no cleaned text")
    stride = size - overlap
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + size, len(text))
        chunks.append(Chunk(doc.id, len(chunks), text[start:end], start, end))
        if end == len(text):
            return chunks
        start += stride


def reconstruct(chunks: list[Chunk], overlap: int) -> str:
    """Invert chunk_document: first chunk whole, then each suffix past the overlap."""
    if not chunks:
        return ""
    parts = [chunks[0].text]
    parts.extend(c.text[overlap:] for c in chunks[1:])
    return "".join(parts)


_KIND_VALUES = {k.value for k in DocKind}


@dataclass
class Manifest:
    kinds: dict[str, DocKind] = field(default_factory=dict)
    titles: dict[str, str] = field(default_factory=dict)


def _read_manifest(path: Path) -> Manifest:
    manifest = Manifest()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestError(path.name, f"line {lineno}: expected 3 tab-separated fields")
        filename, kind, title = (p.strip() for p in parts)
        if kind not in _KIND_VALUES:
            raise ManifestError(path.name, f"line {lineno}: unknown kind {kind!r}")
        manifest.kinds[filename] = DocKind(kind)
        manifest.titles[filename] = title
    return manifest


def load_corpus(path: str | Path) -> list[Document]:
    """Read every .txt/.md file under `path` into a Document.

    Kind and title come from manifest.tsv when present, otherwise kind is
    `other` and the title is the file stem. Documents are returned sorted by
    id so downstream indexing is deterministic.
    """
    root = Path(path)
    if not root.is_dir():
        raise OSError(f"corpus path is not a readable directory: {root}")
    manifest = Manifest()
    manifest_path = root / "manifest.tsv"
    if manifest_path.exists():
        manifest = _read_manifest(manifest_path)
    docs: list[Document] = []
    for file in sorted(root.iterdir()):
        if not file.is_file() or file.name == "manifest.tsv" or file.name.startswith("."):
            continue
        if file.suffix.lower() not in (".txt", ".md"):
            continue
        docs.append(
            Document(
                id=file.stem,
                title=manifest.titles.get(file.name, file.stem),
                kind=manifest.kinds.get(file.name, DocKind.OTHER),
                raw_text=file.read_text(encoding="utf-8"),
            )
        )
    return docs
