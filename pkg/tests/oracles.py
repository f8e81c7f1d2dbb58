"""Independent brute-force scorers used to cross-check the real implementations.

Everything here counts n-grams by scanning lists with list.count() and follows
the scoring definitions step by step. Deliberately slow and free of any code
shared with razewright.metrics.
"""

from __future__ import annotations

import math
from typing import Sequence


def gram_list(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def brute_precision(cand: Sequence[str], refs: Sequence[Sequence[str]], n: int) -> float:
    cand_grams = gram_list(cand, n)
    if not cand_grams:
        return 0.0
    matched = 0
    for gram in set(cand_grams):
        in_cand = cand_grams.count(gram)
        in_refs = max(gram_list(ref, n).count(gram) for ref in refs)
        matched += min(in_cand, in_refs)
    return matched / len(cand_grams)


def brute_bp(c: int, r: int) -> float:
    if r < c:
        return 1.0
    return math.exp(1.0 - r / c)


def brute_bleu(cand: Sequence[str], refs: Sequence[Sequence[str]], n_max: int) -> float:
    c = len(cand)
    best_r = None
    for ref in refs:
        rl = len(ref)
        if best_r is None or abs(rl - c) < abs(best_r - c) or (abs(rl - c) == abs(best_r - c) and rl < best_r):
            best_r = rl
    precisions = [brute_precision(cand, refs, n) for n in range(1, n_max + 1)]
    if any(p == 0.0 for p in precisions):
        return 0.0
    acc = 0.0
    for p in precisions:
        acc += (1.0 / n_max) * math.log(p)
    return brute_bp(c, best_r) * math.exp(acc)


def brute_rouge(cand: Sequence[str], ref: Sequence[str], n: int) -> float:
    ref_grams = gram_list(ref, n)
    if not ref_grams:
        raise ValueError("reference too short")
    cand_grams = gram_list(cand, n)
    matched = 0
    for gram in set(ref_grams):
        matched += min(cand_grams.count(gram), ref_grams.count(gram))
    return matched / len(ref_grams)
