"""BLEU-N and ROUGE-N scoring with explicit, reproducible tokenization.

Tokenization is deliberately simple and self-contained: word mode lowercases,
splits on whitespace/punctuation, and treats every CJK character as its own
token (the corpus this targets is bilingual technical text); char mode keeps
every non-whitespace character. No external tokenizer is involved, so scores
are stable across environments.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import (
    EmptyCandidate,
    EmptyInput,
    InvalidInput,
    NoReferences,
    RazewrightError,
    ReferenceTooShort,
    UndefinedBP,
)
from .fmt import pct_str

# Han ideographs, kana, and hangul: each character scores as one token.
_CJK_RANGES = (
    (0x3040, 0x30FF),   # hiragana + katakana
    (0x31F0, 0x31FF),   # katakana phonetic extensions
    (0x3400, 0x4DBF),   # CJK extension A
    (0x4E00, 0x9FFF),   # CJK unified ideographs
    (0xAC00, 0xD7AF),   # hangul syllables
    (0xF900, 0xFAFF),   # CJK compatibility ideographs
    (0x20000, 0x2A6DF), # CJK extension B
)


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


class TokenizerMode(str, Enum):
    WORD = "word"
    CHAR = "char"


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_text: str
    tokenizer_mode: TokenizerMode

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str, mode: TokenizerMode | str = TokenizerMode.WORD) -> TokenSequence:
    """Split `text` into a TokenSequence under the given mode.

    Word mode: lowercase, alphanumeric runs are words, CJK characters are
    single tokens, everything else separates. Char mode: every non-whitespace
    character is a token, case preserved.
    """
    mode = TokenizerMode(mode)
    tokens: list[str] = []
    if mode is TokenizerMode.CHAR:
        tokens = [ch for ch in text if not ch.isspace()]
    else:
        word: list[str] = []
        for ch in text.lower():
            if _is_cjk(ch):
                if word:
                    tokens.append("".join(word))
                    word = []
                tokens.append(ch)
            elif ch.isalnum():
                word.append(ch)
            else:
                if word:
                    tokens.append("".join(word))
                    word = []
        if word:
            tokens.append("".join(word))
    return TokenSequence(tuple(tokens), text, mode)


def from_tokens(tokens: Sequence[str], mode: TokenizerMode | str = TokenizerMode.WORD) -> TokenSequence:
    """Wrap pre-split tokens (handy in tests and oracles)."""
    return TokenSequence(tuple(tokens), " ".join(tokens), TokenizerMode(mode))


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def brevity_penalty(c: int, r: int) -> float:
    """Piecewise penalty: 1 when the candidate is longer (r < c), else e^(1-r/c)."""
    if c < 0 or r < 0:
        raise InvalidInput("lengths must be non-negative")
    if r < c:
        return 1.0
    if c == 0:
        raise UndefinedBP("candidate length 0 on the exponentiated branch")
    return math.exp(1.0 - r / c)


@dataclass(frozen=True)
class BleuScore:
    value: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    n_max: int
    weights: tuple[float, ...]


def _clipped_precision(cand: Sequence[str], refs: Sequence[Sequence[str]], n: int) -> float:
    """Candidate n-gram counts clipped to the max count in any reference."""
    cand_counts = Counter(ngrams(cand, n))
    total = sum(cand_counts.values())
    if total == 0:
        return 0.0
    matched = 0
    for gram, count in cand_counts.items():
        clip = max(Counter(ngrams(ref, n))[gram] for ref in refs)
        matched += min(count, clip)
    return matched / total


def bleu(
    candidate: TokenSequence,
    references: Sequence[TokenSequence],
    n_max: int = 4,
    weights: Sequence[float] | None = None,
    smooth_eps: float = 0.0,
) -> BleuScore:
    """BLEU-N: brevity penalty times the weighted geometric mean of clipped
    n-gram precisions, n = 1..n_max.

    If any precision is 0 the score is 0 (no smoothing by default; pass
    smooth_eps > 0 to floor zero precisions instead). The effective reference
    length is the one closest to the candidate length, ties to the shorter.
    """
    if not candidate.tokens:
        raise EmptyCandidate("candidate has no tokens")
    if not references:
        raise NoReferences("at least one reference required")
    if weights is None:
        weights = [1.0 / n_max] * n_max
    weights = tuple(float(w) for w in weights)
    if len(weights) != n_max:
        raise InvalidInput(f"need {n_max} weights, got {len(weights)}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise InvalidInput("weights must sum to 1")

    ref_tokens = [ref.tokens for ref in references]
    c = len(candidate.tokens)
    r = min((len(t) for t in ref_tokens), key=lambda length: (abs(length - c), length))
    bp = brevity_penalty(c, r)

    precisions = []
    for n in range(1, n_max + 1):
        p = _clipped_precision(candidate.tokens, ref_tokens, n)
        if p == 0.0 and smooth_eps > 0.0:
            p = smooth_eps
        precisions.append(p)

    if any(p == 0.0 for p in precisions):
        value = 0.0
    else:
        value = bp * math.exp(sum(w * math.log(p) for w, p in zip(weights, precisions)))
    return BleuScore(value, tuple(precisions), bp, n_max, weights)


def rouge_n(candidate: TokenSequence, reference: TokenSequence, n: int) -> float:
    """Recall of reference n-grams, with multiset (clipped) matching."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    ref_counts = Counter(ngrams(reference.tokens, n))
    total_ref = sum(ref_counts.values())
    if total_ref == 0:
        raise ReferenceTooShort(f"reference has fewer than {n} tokens")
    cand_counts = Counter(ngrams(candidate.tokens, n))
    matched = sum(min(count, cand_counts[gram]) for gram, count in ref_counts.items())
    return matched / total_ref


@dataclass
class CorpusReport:
    """Arithmetic-mean BLEU-4 / ROUGE-1 / ROUGE-2 over candidate/reference pairs."""

    bleu4: float
    rouge1: float
    rouge2: float
    n_pairs: int
    n_skipped: int
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "bleu4_pct": pct_str(self.bleu4),
            "rouge1_pct": pct_str(self.rouge1),
            "rouge2_pct": pct_str(self.rouge2),
            "pairs_scored": self.n_pairs,
            "pairs_skipped": self.n_skipped,
        }

    def as_text(self) -> str:
        lines = [
            "Metric    Value / %",
            f"BLEU-4    {pct_str(self.bleu4)}",
            f"ROUGE-1   {pct_str(self.rouge1)}",
            f"ROUGE-2   {pct_str(self.rouge2)}",
            f"(pairs scored: {self.n_pairs}, skipped: {self.n_skipped})",
        ]
        return "\n".join(lines)


def evaluate_corpus(pairs: Sequence[tuple[TokenSequence, TokenSequence]]) -> CorpusReport:
    """Score each (candidate, reference) pair and average arithmetically.

    Pairs that cannot be scored (empty candidate, reference too short for a
    bigram) are skipped with the reason recorded, not propagated.
    """
    if not pairs:
        raise EmptyInput("no pairs to evaluate")
    sums = {"bleu4": 0.0, "rouge1": 0.0, "rouge2": 0.0}
    skipped: list[tuple[int, str]] = []
    scored = 0
    for i, (cand, ref) in enumerate(pairs):
        try:
            b = bleu(cand, [ref], n_max=4).value
            r1 = rouge_n(cand, ref, 1)
            r2 = rouge_n(cand, ref, 2)
        except RazewrightError as exc:
            skipped.append((i, f"{type(exc).__name__}: {exc}"))
            continue
        sums["bleu4"] += b
        sums["rouge1"] += r1
        sums["rouge2"] += r2
        scored += 1
    if scored == 0:
        raise EmptyInput("no scorable pairs")
    return CorpusReport(
        bleu4=sums["bleu4"] / scored,
        rouge1=sums["rouge1"] / scored,
        rouge2=sums["rouge2"] / scored,
        n_pairs=scored,
        n_skipped=len(skipped),
        skipped=skipped,
    )
