"""Default prompt templates, overridable from a templates directory.

File overrides use the template name plus .txt (e.g. `role_analysis.txt`,
`answer.txt`). Placeholders are literal brace tokens substituted by the
consuming module: {text}, {context}, {query}, {precondition}, {out:<role>}.
"""

from __future__ import annotations

from pathlib import Path

ANSWER = """You are an assistant for steel-structure demolition engineering. \
Use the provided context to answer precisely; if the context is insufficient, say so.

Context:
{context}

Question: {query}

Answer:"""

EXTRACTION = """Read the passage and list the engineering entities it mentions and the \
relationships between them. Reply with one record per line and nothing else, using \
exactly these formats:
ENTITY<|>name<|>type<|>short description
RELATION<|>source entity<|>target entity<|>keyword1, keyword2<|>short description<|>weight

Weight is a positive number for the relationship strength. Passage:
{text}"""

KEYWORDS = """For the question below, list retrieval keywords on one line in exactly this form:
LOW: comma, separated, specific, terms | HIGH: comma, separated, broad, themes

LOW keywords name concrete entities or components; HIGH keywords name overarching topics.
Question: {query}"""

DATASET_GENERATION = """Based on the text below, write 1 high-quality entry for an \
instruction-tuning dataset. Keep it general rather than tied to one project, and vary the \
instruction style (analyze, compare, explain, evaluate, or a why-question). Reply with valid \
JSON only, in exactly this shape:
{"instruction": "a specific question or task grounded in the text", "input": "extra context \
if the task needs it, otherwise an empty string", "output": "a detailed, accurate answer"}

Text:
{text}"""

EXAM_CHOICE = """Answer the multiple-choice question. Reply with the single letter of the \
correct option and nothing else.

{stem}

{options}"""

EXAM_JUDGMENT = """Decide whether the statement is true or false. Reply with exactly one word, \
"true" or "false".

{stem}"""

ROLE_ANALYSIS = """You are the analysis expert of a structural demolition engineering team. \
Study the project precondition and identify the problems the demolition must deal with: weak \
or degraded members, support conditions, monitoring discrepancies, and sequencing risks.

Reference material:
{context}

Project precondition:
{precondition}

List the potential problems for demolition, each with a short justification."""

ROLE_DEMOLITION = """You are the demolition-method expert of a structural demolition \
engineering team. For each problem raised by the analysis expert, propose a concrete solution \
and say why it will work.

Reference material:
{context}

Project precondition:
{precondition}

Problems raised by the analysis expert:
{out:analysis}

Propose solutions and assess their effectiveness."""

ROLE_INSPECTION = """You are the inspection expert of a structural demolition engineering \
team. Check the problems stated below and the solutions proposed for them: flag anything \
incorrect, unsupported, or newly introduced, and confirm what holds.

Project precondition:
{precondition}

Stated problems:
{out:analysis}

Proposed solutions:
{out:demolition}

Report your inspection findings."""

ROLE_INTEGRATION = """You are the integration expert of a structural demolition engineering \
team. Merge the material below into one coherent account: combine statements that mean the \
same thing, remove redundancy, and keep every distinct point.

Project precondition:
{precondition}

Problems:
{out:analysis}

Solutions:
{out:demolition}

Inspection findings:
{out:inspection}

Produce the integrated summary."""

ROLE_RESPONSE = """You are the chief engineer of a structural demolition engineering team. \
Using the project precondition and your team's work below, write the final comprehensive \
demolition proposal: methods and steps, work to complete before demolition, and matters \
needing attention during demolition.

Reference material:
{context}

Project precondition:
{precondition}

Problems (analysis expert):
{out:analysis}

Solutions (demolition expert):
{out:demolition}

Inspection findings (inspection expert):
{out:inspection}

Integrated summary (integration expert):
{out:integration}

Write the structural demolition proposal."""

DEFAULTS = {
    "answer": ANSWER,
    "extraction": EXTRACTION,
    "keywords": KEYWORDS,
    "dataset_generation": DATASET_GENERATION,
    "exam_choice": EXAM_CHOICE,
    "exam_judgment": EXAM_JUDGMENT,
    "role_analysis": ROLE_ANALYSIS,
    "role_demolition": ROLE_DEMOLITION,
    "role_inspection": ROLE_INSPECTION,
    "role_integration": ROLE_INTEGRATION,
    "role_response": ROLE_RESPONSE,
}


def load_template(name: str, templates_dir: str | Path | None = None) -> str:
    """Return the override from `templates_dir/<name>.txt` if present, else the default."""
    if templates_dir is not None:
        override = Path(templates_dir) / f"{name}.txt"
        if override.exists():
            return override.read_text(encoding="utf-8")
    return DEFAULTS[name]
