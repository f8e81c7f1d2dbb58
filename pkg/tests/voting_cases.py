"""Enumerated scripted voting scenarios, hand-checked.

Each case scripts the raw replies round by round and states the expected
outcome of the voting protocol: final answer, rounds consumed, rounds that
ended tied, and whether the tie-break was forced at the round cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class VotingCase:
    name: str
    kind: str  # choice | judgment
    rounds: tuple[tuple[str, ...], ...]
    expected_final: object
    expected_rounds: int
    expected_tie_rounds: int
    forced: bool = False
    fresh: bool = False
    max_rounds: int = 5


X = "It depends."  # parses to None for both kinds

CASES = [
    # --- unique mode in round 1 ---
    VotingCase("unanimous", "choice", (("A", "A", "A", "A", "A"),), "A", 1, 0),
    VotingCase("simple_majority", "choice", (("A", "A", "B", "A", "C"),), "A", 1, 0),
    VotingCase(
        "majority_with_prose",
        "choice",
        (("The answer is B.", "B", "b", "C", "D"),),
        "B",
        1,
        0,
    ),
    VotingCase("plurality_not_majority", "choice", (("A", "A", "B", "C", "D"),), "A", 1, 0),
    VotingCase("single_valid_vote", "choice", ((X, X, "A", X, X),), "A", 1, 0),
    VotingCase("first_standalone_letter", "choice", (("I pick B, not C.", "B", "B", X, X),), "B", 1, 0),
    VotingCase("letters_inside_words_ignored", "choice", (("abcd", "abcd", "abcd", "abcd", "C"),), "C", 1, 0),
    VotingCase("lowercase_label", "choice", (("a.", "A", "B", "C", X),), "A", 1, 0),
    # --- two-way ties resolved by accumulation ---
    VotingCase(
        "two_way_tie_resolved",
        "choice",
        (("A", "A", "B", "B", "C"), ("A", "C", "C", "B", "A")),
        "A",
        2,
        1,
    ),
    VotingCase(
        "two_way_tie_flips",
        "choice",
        (("A", "A", "B", "B", "C"), ("B", "C", "C", "A", "B")),
        "B",
        2,
        1,
    ),
    VotingCase(
        "unparseables_excluded_from_counts",
        "choice",
        ((X, X, X, "A", "B"), (X, X, X, X, "A")),
        "A",
        2,
        1,
    ),
    # --- three-way tie chain ---
    VotingCase(
        "three_way_tie_chain",
        "choice",
        (
            ("A", "B", "C", "A", "B"),
            ("C", "C", "D", "D", "A"),
            ("A", "D", "D", "B", "B"),
            ("A", "A", "B", "D", "C"),
        ),
        "A",
        4,
        3,
    ),
    # --- resolution exactly at the cap ---
    VotingCase(
        "resolved_in_final_round",
        "choice",
        (
            ("A", "B", X, X, X),
            ("A", "B", X, X, X),
            ("A", "B", X, X, X),
            ("A", "B", X, X, X),
            ("A", X, X, X, X),
        ),
        "A",
        5,
        4,
    ),
    # --- forced tie-breaks at the cap ---
    VotingCase(
        "persistent_tie_first_seen_a",
        "choice",
        (("A", "B", "A", "B", X),) * 5,
        "A",
        5,
        5,
        forced=True,
    ),
    VotingCase(
        "persistent_tie_first_seen_b",
        "choice",
        (("B", "A", "B", "A", X),) * 5,
        "B",
        5,
        5,
        forced=True,
    ),
    VotingCase(
        "unparseable_flood",
        "choice",
        ((X, X, X, X, X),) * 5,
        None,
        5,
        5,
        forced=True,
    ),
    VotingCase(
        "short_cap_forced",
        "choice",
        (("A", "B", X, X, X), ("B", "A", X, X, X)),
        "A",
        2,
        2,
        forced=True,
        max_rounds=2,
    ),
    # --- judgment questions ---
    VotingCase("judgment_unanimous", "judgment", (("true", "true", "true", "true", "true"),), True, 1, 0),
    VotingCase(
        "judgment_synonyms",
        "judgment",
        (("Correct - this statement is true.", "Yes", "right", "false", "T"),),
        True,
        1,
        0,
    ),
    VotingCase(
        "judgment_false_majority",
        "judgment",
        (("maybe", "false", "true", "false", "hmm"),),
        False,
        1,
        0,
    ),
    VotingCase(
        "judgment_negation_prefix",
        "judgment",
        (("Incorrect. The claim is false.", "false", "no", "yes", X),),
        False,
        1,
        0,
    ),
    VotingCase(
        "judgment_cjk_synonyms",
        "judgment",
        (("正确", "不正确", "正确", "否", "是"),),
        True,
        1,
        0,
    ),
    VotingCase(
        "judgment_tie_then_resolve",
        "judgment",
        (("true", "false", "true", "false", X), ("true", X, X, X, X)),
        True,
        2,
        1,
    ),
    # --- fresh-rounds counting mode ---
    VotingCase(
        "fresh_rounds_new_winner",
        "choice",
        (("A", "A", "B", "B", X), ("C", "C", X, X, X)),
        "C",
        2,
        1,
        fresh=True,
    ),
    VotingCase(
        "accumulate_same_script_keeps_going",
        "choice",
        (("A", "A", "B", "B", X), ("C", "C", X, X, X), ("A", X, X, X, X)),
        "A",
        3,
        2,
    ),
]

assert len(CASES) >= 20

CHOICE_OPTIONS = [
    "Remove the corroded members first",
    "Work from the grid center outward",
    "Increase crane counterweight only",
    "Skip the trial lift",
]


def question_for(case: VotingCase):
    from razewright.exam import Question

    if case.kind == "choice":
        return Question(id=f"q-{case.name}", kind="choice", stem="Which step comes first?",
                        options=list(CHOICE_OPTIONS), answer_key="A")
    return Question(id=f"q-{case.name}", kind="judgment",
                    stem="Temporary supports may be removed before load transfer checks.",
                    answer_key=False)


def scripted_llm(case: VotingCase):
    from razewright.providers import MockChatProvider

    queue = [reply for round_ in case.rounds for reply in round_]
    return MockChatProvider(queue=list(queue))
