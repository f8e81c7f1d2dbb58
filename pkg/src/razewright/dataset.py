"""Instruction-dataset synthesis from corpus chunks.

The generator prompts a chat model once per chunk (per_chunk times) and runs
every reply through strict JSON validation. Replies that fail validation are
not silently dropped: they land in a rejects list with the reason, mirroring
the manual-review step this replaces. Files are JSONL with exactly the
instruction/input/output fields.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Sequence

from .corpus import Chunk
from .errors import (
    BadFieldType,
    EmptyField,
    InvalidInput,
    InvalidRatio,
    MissingField,
    NoJsonFound,
    ProviderError,
    ValidationError,
)
from .providers import ChatProvider, user_request


@dataclass(frozen=True)
class InstructionEntry:
    instruction: str
    input: str
    output: str


@dataclass
class DatasetSplit:
    train: list[InstructionEntry]
    test: list[InstructionEntry]
    seed: int
    ratio: float


@dataclass(frozen=True)
class Reject:
    chunk_id: str
    reason: str
    raw_reply: str


@dataclass
class GenerationResult:
    entries: list[InstructionEntry] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    failed_chunk_id: str | None = None  # set when a provider failure aborted the batch
    error: str | None = None


def _strip_code_fences(raw: str) -> str:
    text = raw.strip()
    if text.startswith("```"):
        first_newline = text.find("\n")
        if first_newline >= 0:
            text = text[first_newline + 1 :]
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    return text


def _first_json_object(text: str) -> str:
    """Return the first balanced top-level {...} substring; trailing prose is ignored."""
    start = text.find("{")
    if start < 0:
        raise NoJsonFound("no JSON object in reply")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise NoJsonFound("unbalanced JSON object in reply")


def validate_entry(raw: str) -> InstructionEntry:
    """Parse one LLM reply into an InstructionEntry.

    Tolerates code fences and surrounding prose; requires string fields,
    non-empty instruction/output; a missing input defaults to empty.
    """
    candidate = _first_json_object(_strip_code_fences(raw))
    try:
        obj = json.loads(candidate)
    except json.JSONDecodeError as exc:
        raise NoJsonFound(f"JSON parse failed: {exc}") from exc
    if not isinstance(obj, dict):
        raise NoJsonFound("top-level JSON value is not an object")
    for name in ("instruction", "output"):
        if name not in obj:
            raise MissingField(name)
    values = {}
    for name in ("instruction", "input", "output"):
        value = obj.get(name, "")
        if not isinstance(value, str):
            raise BadFieldType(name)
        values[name] = value
    for name in ("instruction", "output"):
        if not values[name].strip():
            raise EmptyField(name)
    return InstructionEntry(values["instruction"], values["input"], values["output"])


def serialize_entry(entry: InstructionEntry) -> str:
    return json.dumps(
        {"instruction": entry.instruction, "input": entry.input, "output": entry.output},
        ensure_ascii=False,
    )


def generate_entries(
    chunks: Sequence[Chunk],
    llm: ChatProvider,
    prompt_template: str,
    per_chunk: int = 1,
    model: str = "",
    temperature: float = 0.7,
) -> GenerationResult:
    """Generate per_chunk candidate entries for every chunk, in chunk order.

    A provider failure stops the batch at the failing chunk; everything
    collected so far is still returned, with the failure recorded.
    """
    if not chunks:
        raise InvalidInput("no chunks to generate from")
    if per_chunk < 1:
        raise InvalidInput("per_chunk must be positive")
    if "{text}" not in prompt_template:
        raise InvalidInput("prompt template must contain {text}")
    result = GenerationResult()
    for chunk in chunks:
        prompt = prompt_template.replace("{text}", chunk.text)
        for _ in range(per_chunk):
            try:
                reply = llm.chat(user_request(model, prompt, temperature=temperature))
            except ProviderError as exc:
                result.failed_chunk_id = chunk.chunk_id
                result.error = f"{type(exc).__name__}: {exc}"
                return result
            try:
                result.entries.append(validate_entry(reply))
            except ValidationError as exc:
                result.rejects.append(Reject(chunk.chunk_id, f"{type(exc).__name__}: {exc}", reply))
    return result


def dedupe(entries: Sequence[InstructionEntry]) -> list[InstructionEntry]:
    """Drop exact (instruction, input) duplicates, keeping first occurrences."""
    seen: set[tuple[str, str]] = set()
    out: list[InstructionEntry] = []
    for entry in entries:
        key = (entry.instruction, entry.input)
        if key not in seen:
            seen.add(key)
            out.append(entry)
    return out


def split(entries: Sequence[InstructionEntry], ratio: float, seed: int) -> DatasetSplit:
    """Seeded shuffle, then the first floor(n * ratio) entries become train."""
    if not entries:
        raise InvalidInput("no entries to split")
    if not 0.0 < ratio < 1.0:
        raise InvalidRatio(f"ratio must be in (0, 1), got {ratio}")
    shuffled = list(entries)
    random.Random(seed).shuffle(shuffled)
    # Decimal avoids float dust flipping the floor (10 * 0.1 == 0.999... in binary)
    cut = int(Decimal(repr(ratio)) * len(shuffled))
    return DatasetSplit(train=shuffled[:cut], test=shuffled[cut:], seed=seed, ratio=ratio)


# --- file I/O ---------------------------------------------------------------


def write_entries(entries: Sequence[InstructionEntry], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(serialize_entry(entry) + "\n")
    return path


def read_entries(path: str | Path) -> list[InstructionEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            entries.append(validate_entry(line))
        except ValidationError as exc:
            raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
    return entries


def write_rejects(rejects: Sequence[Reject], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for reject in rejects:
            fh.write(
                json.dumps(
                    {"chunk_id": reject.chunk_id, "reason": reject.reason, "raw_reply": reject.raw_reply},
                    ensure_ascii=False,
                )
                + "\n"
            )
    return path
