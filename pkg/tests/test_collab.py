import pytest

from razewright.collab import (
    PERSONA,
    PipelineAborted,
    ProposalBundle,
    RoleSpec,
    StructurePrecondition,
    default_roles,
    parse_precondition,
    render_role_prompt,
    run_pipeline,
    scenario_prompt,
    validate_roles,
)
from razewright.errors import (
    EmptyBody,
    EmptyInput,
    EmptyStore,
    MissingUpstream,
    TemplateError,
)
from razewright.providers import MockChatProvider, ScriptedFailure
from razewright.retrieve import ContextBundle, ScoredChunk

PRECONDITION_TEXT = """Engineering overview: a square pyramid space grid over the east workshop, due for removal this season.
Structural scale: 24 m by 18 m on plan, peripheral bearings on eight columns.
Finite element update results: elastic modulus of the chords near the south bearing reduced by a quarter.
Finite element analysis results: chord stress close to the allowable limit on the south edge.
Monitoring: strain readings at the grid centre drift from the simulated values."""


def sentinel_llm():
    # reverse pipeline order: later roles' prompts quote earlier roles' labels,
    # so the most specific persona phrase has to win first
    return MockChatProvider(
        rules=[
            ("chief engineer", "OUT-response"),
            ("integration expert of", "OUT-integration"),
            ("inspection expert of", "OUT-inspection"),
            ("demolition-method expert", "OUT-demolition"),
            ("analysis expert of", "OUT-analysis"),
        ]
    )


def stub_retriever(query_text):
    return ContextBundle(
        chunks=[ScoredChunk("doc:0000", "retrieved passage", 0.9)],
        rendered="CTX-RENDERED",
    )


# --- precondition parsing -----------------------------------------------------


def test_parse_precondition_sections():
    pre = parse_precondition(PRECONDITION_TEXT)
    assert "square pyramid space grid" in pre.overview
    assert "24 m by 18 m" in pre.scale
    assert "reduced by a quarter" in pre.fem_update
    assert "allowable limit" in pre.fem_analysis
    assert "strain readings" in pre.monitoring
    assert pre.raw == PRECONDITION_TEXT


def test_parse_precondition_sections_are_verbatim_slices():
    pre = parse_precondition(PRECONDITION_TEXT)
    for section in (pre.overview, pre.scale, pre.fem_update, pre.fem_analysis, pre.monitoring):
        assert section and section in pre.raw


def test_parse_precondition_unstructured_fallback():
    text = "One flowing paragraph about a grid with no headers at all."
    pre = parse_precondition(text)
    assert pre.overview == text
    assert pre.scale == "" and pre.monitoring == ""
    assert pre.raw == text


def test_parse_precondition_empty():
    with pytest.raises(EmptyInput):
        parse_precondition("")
    with pytest.raises(EmptyInput):
        parse_precondition("   \n ")


# --- role specs and rendering ----------------------------------------------------


def test_default_roles_shape():
    roles = default_roles()
    assert [r.name for r in roles] == ["analysis", "demolition", "inspection", "integration", "response"]
    assert roles[-1].inputs == ("analysis", "demolition", "inspection", "integration")
    assert [r.uses_rag for r in roles] == [True, True, False, False, True]
    validate_roles(roles)


def test_validate_roles_rejects_wrong_order():
    roles = default_roles()
    roles[0], roles[1] = roles[1], roles[0]
    with pytest.raises(TemplateError):
        validate_roles(roles)


def test_render_analysis_contains_precondition_verbatim():
    pre = parse_precondition(PRECONDITION_TEXT)
    prompt = render_role_prompt(default_roles()[0], pre, {}, None)
    assert PRECONDITION_TEXT in prompt


def test_render_missing_upstream():
    pre = parse_precondition("text")
    with pytest.raises(MissingUpstream):
        render_role_prompt(default_roles()[1], pre, {}, None)


def test_render_template_missing_declared_placeholder():
    pre = parse_precondition("text")
    role = RoleSpec(
        "demolition",
        "No upstream slot here: {precondition} {context}",
        uses_rag=True,
        inputs=("analysis",),
    )
    with pytest.raises(TemplateError):
        render_role_prompt(role, pre, {"analysis": "A"}, None)


def test_render_template_undeclared_reference_rejected():
    pre = parse_precondition("text")
    role = RoleSpec("analysis", "{precondition} {out:response}", uses_rag=False, inputs=())
    with pytest.raises(TemplateError):
        render_role_prompt(role, pre, {"response": "sneaky"}, None)


def test_render_context_substituted():
    pre = parse_precondition("text")
    ctx = ContextBundle(rendered="CTX")
    prompt = render_role_prompt(default_roles()[0], pre, {}, ctx)
    assert "CTX" in prompt


# --- pipeline ----------------------------------------------------------------------


def test_pipeline_dataflow_sentinels():
    pre = parse_precondition(PRECONDITION_TEXT)
    bundle = run_pipeline(pre, sentinel_llm(), retriever=stub_retriever)
    assert bundle.outputs == {
        "analysis": "OUT-analysis",
        "demolition": "OUT-demolition",
        "inspection": "OUT-inspection",
        "integration": "OUT-integration",
        "response": "OUT-response",
    }
    response_prompt = bundle.transcript[-1].prompt
    for sentinel in ("OUT-analysis", "OUT-demolition", "OUT-inspection", "OUT-integration"):
        assert sentinel in response_prompt
    assert PRECONDITION_TEXT in response_prompt


def test_pipeline_transcript_order_and_causality():
    pre = parse_precondition(PRECONDITION_TEXT)
    bundle = run_pipeline(pre, sentinel_llm(), retriever=stub_retriever)
    assert [t.role for t in bundle.transcript] == list(
        ("analysis", "demolition", "inspection", "integration", "response")
    )
    # no role's prompt may contain the output of a later role
    order = [t.role for t in bundle.transcript]
    for i, entry in enumerate(bundle.transcript):
        for later in order[i:]:
            assert f"OUT-{later}" not in entry.prompt


def test_pipeline_retrieved_only_for_rag_roles():
    pre = parse_precondition(PRECONDITION_TEXT)
    bundle = run_pipeline(pre, sentinel_llm(), retriever=stub_retriever)
    assert set(bundle.retrieved) == {"analysis", "demolition", "response"}
    assert "CTX-RENDERED" in bundle.transcript[0].prompt


def test_pipeline_without_retriever_completes():
    pre = parse_precondition("plain precondition")
    bundle = run_pipeline(pre, sentinel_llm(), retriever=None)
    assert len(bundle.outputs) == 5
    assert bundle.retrieved == {}


def test_pipeline_retrieval_failure_degrades_with_warning():
    pre = parse_precondition("plain precondition")

    def broken_retriever(query_text):
        raise EmptyStore("no index")

    bundle = run_pipeline(pre, sentinel_llm(), retriever=broken_retriever)
    assert len(bundle.outputs) == 5
    assert bundle.retrieved == {}
    assert any("analysis" in w for w in bundle.warnings)


def test_pipeline_aborts_with_partial_transcript():
    pre = parse_precondition("plain precondition")
    llm = MockChatProvider(
        queue=["OUT-analysis", "OUT-demolition"] + [ScriptedFailure("transport")] * 3
    )
    with pytest.raises(PipelineAborted) as exc:
        run_pipeline(pre, llm, retriever=None)
    partial = exc.value.partial
    assert exc.value.role == "inspection"
    assert [t.role for t in partial.transcript] == ["analysis", "demolition"]


def test_pipeline_replay_byte_identical():
    pre = parse_precondition(PRECONDITION_TEXT)

    def run():
        return run_pipeline(pre, sentinel_llm(), retriever=stub_retriever).to_json()

    assert run() == run()


def test_bundle_proposal_property():
    bundle = ProposalBundle(precondition=StructurePrecondition(raw="x"), outputs={"response": "final"})
    assert bundle.proposal == "final"


# --- scenario prompts -----------------------------------------------------------------


def test_scenario_safety_rules():
    prompt = scenario_prompt("safety_rules")
    assert prompt.startswith(PERSONA)
    assert "safety rules" in prompt


def test_scenario_scheme_outline():
    prompt = scenario_prompt("scheme_outline")
    assert prompt.startswith(PERSONA)
    assert "outline of the structural demolition plan" in prompt


def test_scenario_custom():
    prompt = scenario_prompt("custom", "List required cranes.")
    assert prompt == f"{PERSONA} List required cranes."


def test_scenario_custom_empty_body():
    with pytest.raises(EmptyBody):
        scenario_prompt("custom", "   ")


def test_scenario_unknown_kind():
    with pytest.raises(EmptyInput):
        scenario_prompt("mystery")
