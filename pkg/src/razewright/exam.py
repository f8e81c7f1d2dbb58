"""Objective-question harness with modal voting.

Each question is asked `votes_per_round` times (5 by default); if the parsed
answers have a unique most-frequent value the question is decided, otherwise
further 5-call rounds run, accumulating counts, until a unique mode appears
or `max_rounds` is hit (then the tie breaks to the first-seen answer and the
record says so). Unparseable replies never count as votes but stay in the
transcript. A `fresh_rounds` flag switches to per-round counting instead of
accumulation.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import InvalidInput, ProviderError, RazewrightError
from .fmt import pct, pct_str
from . import templates
from .providers import ChatProvider, user_request

LABELS = "ABCDEF"

KIND_CHOICE = "choice"
KIND_JUDGMENT = "judgment"

# earliest word-bounded (ASCII) or substring (CJK) hit decides a judgment reply
TRUE_SYNONYMS = ("true", "correct", "yes", "right", "t", "对", "正确", "是")
FALSE_SYNONYMS = ("false", "incorrect", "wrong", "no", "f", "不正确", "错误", "错", "否")

Answer = object  # parsed answers are str labels, bools, or None (unparseable)


@dataclass
class Question:
    id: str
    kind: str
    stem: str
    options: list[str] = field(default_factory=list)
    answer_key: str | bool = ""

    def __post_init__(self):
        if self.kind not in (KIND_CHOICE, KIND_JUDGMENT):
            raise InvalidInput(f"question {self.id}: unknown kind {self.kind!r}")
        if not self.stem:
            raise InvalidInput(f"question {self.id}: empty stem")
        if self.kind == KIND_CHOICE:
            if not 2 <= len(self.options) <= 6:
                raise InvalidInput(f"question {self.id}: choice needs 2-6 options")
            if self.answer_key not in self.labels:
                raise InvalidInput(f"question {self.id}: answer_key {self.answer_key!r} not a label")
        else:
            if self.options:
                raise InvalidInput(f"question {self.id}: judgment takes no options")
            if not isinstance(self.answer_key, bool):
                raise InvalidInput(f"question {self.id}: judgment answer_key must be boolean")

    @property
    def labels(self) -> str:
        return LABELS[: len(self.options)]


def extract_answer(raw: str, question: Question):
    """Parse a reply to a label (choice), a bool (judgment), or None."""
    if question.kind == KIND_CHOICE:
        match = re.search(rf"\b([{question.labels}])\b", raw, re.IGNORECASE)
        return match.group(1).upper() if match else None
    hits: list[tuple[int, int, bool]] = []  # (position, -len, value)
    lowered = raw.lower()
    for value, synonyms in ((True, TRUE_SYNONYMS), (False, FALSE_SYNONYMS)):
        for syn in synonyms:
            if syn.isascii():
                match = re.search(rf"\b{re.escape(syn)}\b", lowered)
                pos = match.start() if match else -1
            else:
                pos = raw.find(syn)
            if pos >= 0:
                hits.append((pos, -len(syn), value))
    if not hits:
        return None
    return min(hits)[2]


def build_question_prompt(question: Question, templates_dir=None) -> str:
    if question.kind == KIND_CHOICE:
        options = "\n".join(f"{label}. {text}" for label, text in zip(question.labels, question.options))
        template = templates.load_template("exam_choice", templates_dir)
        return template.replace("{stem}", question.stem).replace("{options}", options)
    template = templates.load_template("exam_judgment", templates_dir)
    return template.replace("{stem}", question.stem)


@dataclass
class VotingConfig:
    votes_per_round: int = 5
    max_rounds: int = 5
    temperature: float = 0.7
    fresh_rounds: bool = False  # count each round alone instead of accumulating
    model: str = ""

    def __post_init__(self):
        if self.votes_per_round < 1 or self.max_rounds < 1:
            raise InvalidInput("votes_per_round and max_rounds must be positive")


@dataclass
class Round:
    replies: list[str]
    parsed: list  # one parsed answer (or None) per reply


@dataclass
class VoteRecord:
    question_id: str
    rounds: list[Round] = field(default_factory=list)
    final: object = None
    tie_rounds: int = 0
    forced_tiebreak: bool = False

    def total_calls(self) -> int:
        return sum(len(r.replies) for r in self.rounds)


class VotingAborted(RazewrightError):
    def __init__(self, partial: VoteRecord, cause: ProviderError):
        super().__init__(f"voting aborted on {partial.question_id}: {cause}")
        self.partial = partial
        self.cause = cause


def _unique_mode(pool: Sequence):
    """The single most frequent value, or None when empty or tied at the top."""
    if not pool:
        return None
    counts = Counter(pool)
    top = max(counts.values())
    winners = [value for value, count in counts.items() if count == top]
    return winners[0] if len(winners) == 1 else None


def _first_seen_top(pool: Sequence):
    if not pool:
        return None
    counts = Counter(pool)
    top = max(counts.values())
    for value in pool:  # pool preserves reply order, so first-seen wins
        if counts[value] == top:
            return value
    return None


def answer_with_voting(question: Question, llm: ChatProvider, cfg: VotingConfig | None = None,
                       templates_dir=None) -> VoteRecord:
    """Run the modal-voting protocol for one question."""
    cfg = cfg or VotingConfig()
    prompt = build_question_prompt(question, templates_dir)
    record = VoteRecord(question_id=question.id)
    accumulated: list = []
    for _ in range(cfg.max_rounds):
        replies: list[str] = []
        parsed: list = []
        for _ in range(cfg.votes_per_round):
            try:
                reply = llm.chat(user_request(cfg.model, prompt, temperature=cfg.temperature))
            except ProviderError as exc:
                record.rounds.append(Round(replies, parsed))
                record.forced_tiebreak = True
                raise VotingAborted(record, exc) from exc
            replies.append(reply)
            parsed.append(extract_answer(reply, question))
        record.rounds.append(Round(replies, parsed))
        valid = [p for p in parsed if p is not None]
        accumulated.extend(valid)
        pool = valid if cfg.fresh_rounds else accumulated
        winner = _unique_mode(pool)
        if winner is not None:
            record.final = winner
            record.tie_rounds = len(record.rounds) - 1
            return record
    record.final = _first_seen_top(accumulated)
    record.tie_rounds = len(record.rounds)
    record.forced_tiebreak = True
    return record


# --- reports -----------------------------------------------------------------


@dataclass
class QuestionOutcome:
    question_id: str
    kind: str
    final: object
    correct: bool
    vote_record: VoteRecord | None = None


@dataclass
class ExamReport:
    outcomes: list[QuestionOutcome] = field(default_factory=list)
    incomplete: bool = False

    @classmethod
    def from_counts(cls, counts: Mapping[str, tuple[int, int]]) -> "ExamReport":
        """Synthesize a report from per-kind (correct, total) counts."""
        outcomes = []
        for kind, (correct, total) in counts.items():
            for i in range(total):
                outcomes.append(QuestionOutcome(f"{kind}-{i}", kind, None, i < correct))
        return cls(outcomes=outcomes)

    def kinds(self) -> list[str]:
        seen = []
        for outcome in self.outcomes:
            if outcome.kind not in seen:
                seen.append(outcome.kind)
        return seen

    def kind_counts(self, kind: str) -> tuple[int, int]:
        rows = [o for o in self.outcomes if o.kind == kind]
        return sum(o.correct for o in rows), len(rows)

    def kind_accuracy(self, kind: str) -> float:
        correct, total = self.kind_counts(kind)
        if total == 0:
            raise InvalidInput(f"no questions of kind {kind!r}")
        return correct / total

    def mean_of_kinds(self) -> float:
        kinds = self.kinds()
        if not kinds:
            raise InvalidInput("empty report")
        return sum(self.kind_accuracy(k) for k in kinds) / len(kinds)

    def micro_accuracy(self) -> float:
        if not self.outcomes:
            raise InvalidInput("empty report")
        return sum(o.correct for o in self.outcomes) / len(self.outcomes)

    def as_dict(self) -> dict:
        per_kind = {}
        for kind in self.kinds():
            correct, total = self.kind_counts(kind)
            per_kind[kind] = {
                "correct": correct,
                "total": total,
                "accuracy_pct": pct_str(self.kind_accuracy(kind)),
            }
        return {
            "per_kind": per_kind,
            "mean_of_kinds_pct": pct_str(self.mean_of_kinds()),
            "micro_accuracy_pct": pct_str(self.micro_accuracy()),
            "incomplete": self.incomplete,
        }

    def as_text(self) -> str:
        lines = ["Kind       Correct  Total  Accuracy / %"]
        for kind in self.kinds():
            correct, total = self.kind_counts(kind)
            lines.append(f"{kind:<10} {correct:>7}  {total:>5}  {pct_str(self.kind_accuracy(kind)):>12}")
        lines.append(f"mean of kinds:  {pct_str(self.mean_of_kinds())}")
        lines.append(f"micro accuracy: {pct_str(self.micro_accuracy())}")
        if self.incomplete:
            lines.append("NOTE: report incomplete (provider failure during the run)")
        return "\n".join(lines)


def run_exam(bank: Sequence[Question], llm: ChatProvider, cfg: VotingConfig | None = None,
             templates_dir=None) -> ExamReport:
    """Vote every question; a provider failure yields a partial report flagged
    incomplete rather than losing finished work."""
    if not bank:
        raise InvalidInput("question bank is empty")
    report = ExamReport()
    for question in bank:
        try:
            record = answer_with_voting(question, llm, cfg, templates_dir)
        except VotingAborted as aborted:
            report.outcomes.append(
                QuestionOutcome(question.id, question.kind, None, False, aborted.partial)
            )
            report.incomplete = True
            return report
        correct = record.final == question.answer_key
        report.outcomes.append(QuestionOutcome(question.id, question.kind, record.final, correct, record))
    return report


# --- comparison table -----------------------------------------------------------


@dataclass
class ComparisonTable:
    configs: list[str]
    rows: list[tuple[str, list[float]]]  # (model, per-config metric fraction)

    def column_means(self) -> list[float]:
        return [
            sum(row[i] for _, row in self.rows) / len(self.rows)
            for i in range(len(self.configs))
        ]

    def as_text(self) -> str:
        width = max(12, *(len(c) for c in self.configs)) + 2
        header = "Model".ljust(14) + "".join(c.rjust(width) for c in self.configs)
        lines = [header]
        for model, row in self.rows:
            lines.append(model.ljust(14) + "".join(pct_str(v).rjust(width) for v in row))
        lines.append("Average".ljust(14) + "".join(pct_str(v).rjust(width) for v in self.column_means()))
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "configs": self.configs,
            "rows": {model: [pct(v) for v in row] for model, row in self.rows},
            "column_means": [pct(v) for v in self.column_means()],
        }


def compare_reports(
    reports: Mapping[str, Mapping[str, ExamReport]], metric: str = "mean_of_kinds"
) -> ComparisonTable:
    """Model-by-configuration accuracy table with a column-mean row.

    Column means average the unrounded per-cell fractions; rounding happens
    only at render time.
    """
    total = sum(len(configs) for configs in reports.values())
    if total < 2:
        raise InvalidInput("need at least two reports to compare")
    configs: list[str] = []
    for model_reports in reports.values():
        for config in model_reports:
            if config not in configs:
                configs.append(config)
    rows = []
    for model, model_reports in reports.items():
        row = []
        for config in configs:
            report = model_reports.get(config)
            if report is None:
                raise InvalidInput(f"model {model!r} missing config {config!r}")
            row.append(_metric_value(report, metric))
        rows.append((model, row))
    return ComparisonTable(configs=configs, rows=rows)


def _metric_value(report: ExamReport, metric: str) -> float:
    if metric == "mean_of_kinds":
        return report.mean_of_kinds()
    if metric == "micro":
        return report.micro_accuracy()
    raise InvalidInput(f"unknown metric {metric!r}")


# --- bank and report files ----------------------------------------------------


def load_bank(path: str | Path) -> list[Question]:
    """Read a JSONL bank: {id, kind, stem, options?, answer_key} per line."""
    bank = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            bank.append(
                Question(
                    id=str(obj["id"]),
                    kind=obj["kind"],
                    stem=obj["stem"],
                    options=list(obj.get("options", [])),
                    answer_key=obj["answer_key"],
                )
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"{path}:{lineno}: bad question: {exc}") from exc
    if not bank:
        raise InvalidInput(f"{path}: empty question bank")
    ids = [q.id for q in bank]
    if len(set(ids)) != len(ids):
        raise InvalidInput(f"{path}: duplicate question ids")
    return bank


def report_to_json(report: ExamReport) -> dict:
    payload = report.as_dict()
    payload["outcomes"] = [
        {
            "question_id": o.question_id,
            "kind": o.kind,
            "final": o.final,
            "correct": o.correct,
            "rounds": None
            if o.vote_record is None
            else [{"replies": r.replies, "parsed": r.parsed} for r in o.vote_record.rounds],
            "tie_rounds": None if o.vote_record is None else o.vote_record.tie_rounds,
            "forced_tiebreak": None if o.vote_record is None else o.vote_record.forced_tiebreak,
        }
        for o in report.outcomes
    ]
    return payload


def load_report(path: str | Path) -> ExamReport:
    """Rebuild a report (outcome level) from the JSON written by `exam run`."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    report = ExamReport(incomplete=bool(obj.get("incomplete")))
    for row in obj["outcomes"]:
        report.outcomes.append(
            QuestionOutcome(row["question_id"], row["kind"], row.get("final"), bool(row["correct"]))
        )
    return report
