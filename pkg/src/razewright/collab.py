"""Five-role collaboration pipeline for demolition-proposal generation.

Roles run in a fixed order -- analysis, demolition, inspection, integration,
response -- each prompted with the structure precondition, the outputs of its
declared upstream roles, and (for RAG-enabled roles) retrieved context. The
final role sees everything, so its reply is the deliverable; the full
transcript is kept for audit. One pipeline run is strictly sequential; only
independent runs parallelize.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import (
    EmptyBody,
    EmptyInput,
    MissingUpstream,
    ProviderError,
    RazewrightError,
    TemplateError,
)
from .providers import ChatProvider, user_request
from .retrieve import ContextBundle
from . import templates

ROLE_ORDER = ("analysis", "demolition", "inspection", "integration", "response")

PERSONA = "You are a steel structure demolition expert."

SCENARIO_TASKS = {
    "safety_rules": (
        "Your task is to formulate safety rules for the demolition plan of the structure, "
        "and the content should be as detailed as possible."
    ),
    "scheme_outline": (
        "Your task is to develop an outline of the structural demolition plan and explain "
        "what each part needs to write."
    ),
}


@dataclass
class StructurePrecondition:
    overview: str = ""
    scale: str = ""
    fem_update: str = ""
    fem_analysis: str = ""
    monitoring: str = ""
    raw: str = ""


# section -> header keywords recognized at line starts (case-insensitive)
SECTION_KEYWORDS = {
    "overview": ("engineering overview", "project overview", "overview"),
    "scale": ("structural scale", "scale"),
    "fem_update": ("finite element update", "finite element model updating", "model updating results", "fem update"),
    "fem_analysis": ("finite element analysis", "fem analysis"),
    "monitoring": ("monitoring",),
}


def parse_precondition(text: str) -> StructurePrecondition:
    """Split a precondition block into its named sections.

    A line opening with a known header keyword starts that section; text
    before any header (or all of it, when no header matches) is the overview.
    Section contents are verbatim slices of the input; `raw` always keeps the
    whole text.
    """
    if not text or not text.strip():
        raise EmptyInput("precondition text is empty")
    pre = StructurePrecondition(raw=text)
    assignments: list[tuple[str, str]] = []  # (section, content line)
    current = "overview"
    for line in text.splitlines():
        lowered = line.strip().casefold()
        matched = None
        for section, keywords in SECTION_KEYWORDS.items():
            for keyword in keywords:
                if lowered.startswith(keyword):
                    matched = (section, keyword)
                    break
            if matched:
                break
        if matched:
            current = matched[0]
            remainder = line.strip()[len(matched[1]) :].lstrip(" :.-")
            if remainder:
                assignments.append((current, remainder))
        else:
            assignments.append((current, line))
    merged: dict[str, list[str]] = {}
    for section, content in assignments:
        merged.setdefault(section, []).append(content)
    for section, lines in merged.items():
        setattr(pre, section, "\n".join(lines).strip())
    return pre


@dataclass
class RoleSpec:
    name: str
    prompt_template: str
    uses_rag: bool = False
    inputs: tuple[str, ...] = ()
    task_phrase: str = ""  # appended to the precondition to form the retrieval query
    model: str = ""  # per-role override; empty falls back to the pipeline default

    def __post_init__(self):
        if self.name not in ROLE_ORDER:
            raise TemplateError(f"unknown role: {self.name}")


def default_roles(templates_dir=None) -> list[RoleSpec]:
    """The five-role pipeline with its standard dataflow and RAG switches."""
    load = lambda name: templates.load_template(name, templates_dir)
    return [
        RoleSpec(
            "analysis",
            load("role_analysis"),
            uses_rag=True,
            inputs=(),
            task_phrase="identify the problems this demolition must deal with",
        ),
        RoleSpec(
            "demolition",
            load("role_demolition"),
            uses_rag=True,
            inputs=("analysis",),
            task_phrase="propose demolition methods and solutions for the identified problems",
        ),
        RoleSpec(
            "inspection",
            load("role_inspection"),
            uses_rag=False,
            inputs=("analysis", "demolition"),
            task_phrase="inspect and validate the stated problems and solutions",
        ),
        RoleSpec(
            "integration",
            load("role_integration"),
            uses_rag=False,
            inputs=("analysis", "demolition", "inspection"),
            task_phrase="integrate overlapping statements into one account",
        ),
        RoleSpec(
            "response",
            load("role_response"),
            uses_rag=True,
            inputs=("analysis", "demolition", "inspection", "integration"),
            task_phrase="write the comprehensive structural demolition proposal",
        ),
    ]


def validate_roles(roles: list[RoleSpec]):
    """Fixed order, acyclic dataflow, and a fully-connected response role."""
    names = [r.name for r in roles]
    if names != list(ROLE_ORDER):
        raise TemplateError(f"roles must be exactly {ROLE_ORDER} in order, got {names}")
    position = {name: i for i, name in enumerate(names)}
    for role in roles:
        for upstream in role.inputs:
            if position[upstream] >= position[role.name]:
                raise TemplateError(f"role {role.name} cannot consume later role {upstream}")
    if set(roles[-1].inputs) != set(ROLE_ORDER[:-1]):
        raise TemplateError("response role must consume all four predecessors")


_ROLE_PLACEHOLDER_RE = re.compile(r"\{(precondition|context|out:[a-z]+)\}")


def render_role_prompt(
    role: RoleSpec,
    pre: StructurePrecondition,
    upstream: Mapping[str, str],
    ctx: ContextBundle | None = None,
) -> str:
    """Fill a role template with the precondition, upstream outputs, and context."""
    mapping = {"precondition": pre.raw, "context": ctx.rendered if ctx else ""}
    for name in role.inputs:
        if name not in upstream:
            raise MissingUpstream(name)
        mapping[f"out:{name}"] = upstream[name]
    if "{precondition}" not in role.prompt_template:
        raise TemplateError(f"role {role.name}: template missing {{precondition}}")
    for name in role.inputs:
        if f"{{out:{name}}}" not in role.prompt_template:
            raise TemplateError(f"role {role.name}: template missing {{out:{name}}}")
    if role.uses_rag and "{context}" not in role.prompt_template:
        raise TemplateError(f"role {role.name}: template missing {{context}}")

    def substitute(match: re.Match) -> str:
        key = match.group(1)
        if key.startswith("out:") and key[4:] not in role.inputs:
            raise TemplateError(f"role {role.name}: template references undeclared {key}")
        return mapping.get(key, "")

    return _ROLE_PLACEHOLDER_RE.sub(substitute, role.prompt_template)


@dataclass
class TranscriptEntry:
    role: str
    prompt: str
    reply: str


@dataclass
class ProposalBundle:
    precondition: StructurePrecondition
    outputs: dict[str, str] = field(default_factory=dict)
    retrieved: dict[str, ContextBundle] = field(default_factory=dict)
    transcript: list[TranscriptEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def proposal(self) -> str:
        return self.outputs.get("response", "")

    def to_json(self) -> str:
        """Stable serialization of the full run for audit and replay checks."""
        payload = {
            "precondition": self.precondition.raw,
            "outputs": {role: self.outputs.get(role) for role in ROLE_ORDER if role in self.outputs},
            "retrieved": {
                role: {
                    "chunks": [[c.chunk_id, c.text, c.score] for c in bundle.chunks],
                    "rendered": bundle.rendered,
                }
                for role, bundle in self.retrieved.items()
            },
            "transcript": [[t.role, t.prompt, t.reply] for t in self.transcript],
            "warnings": self.warnings,
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


class PipelineAborted(RazewrightError):
    def __init__(self, partial: ProposalBundle, role: str, cause: ProviderError):
        super().__init__(f"pipeline aborted at role {role}: {cause}")
        self.partial = partial
        self.role = role
        self.cause = cause


Retriever = Callable[[str], ContextBundle]


def run_pipeline(
    pre: StructurePrecondition,
    llm: ChatProvider,
    roles: list[RoleSpec] | None = None,
    retriever: Retriever | None = None,
    model: str = "",
    temperature: float = 0.7,
) -> ProposalBundle:
    """Execute the five roles in order, carrying outputs downstream.

    A retrieval failure degrades that role to empty context (warned, not
    fatal); a provider failure aborts with the partial transcript attached.
    """
    roles = roles if roles is not None else default_roles()
    validate_roles(roles)
    bundle = ProposalBundle(precondition=pre)
    for role in roles:
        ctx: ContextBundle | None = None
        if role.uses_rag and retriever is not None:
            query_text = f"{pre.raw}\n{role.task_phrase}"
            try:
                ctx = retriever(query_text)
                bundle.retrieved[role.name] = ctx
            except RazewrightError as exc:  # retrieval trouble degrades, never kills the run
                bundle.warnings.append(f"{role.name}: retrieval failed, using empty context ({exc})")
                ctx = None
        prompt = render_role_prompt(role, pre, bundle.outputs, ctx)
        try:
            reply = llm.chat(user_request(role.model or model, prompt, temperature=temperature))
        except ProviderError as exc:
            raise PipelineAborted(bundle, role.name, exc) from exc
        bundle.outputs[role.name] = reply
        bundle.transcript.append(TranscriptEntry(role.name, prompt, reply))
    return bundle


def scenario_prompt(kind: str, body: str = "") -> str:
    """Persona line plus the task sentence for a canned or custom scenario."""
    if kind in SCENARIO_TASKS:
        return f"{PERSONA} {SCENARIO_TASKS[kind]}"
    if kind == "custom":
        if not body or not body.strip():
            raise EmptyBody("custom scenario requires a body")
        return f"{PERSONA} {body.strip()}"
    raise EmptyInput(f"unknown scenario kind: {kind!r}")
