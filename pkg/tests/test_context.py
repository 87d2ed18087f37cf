from __future__ import annotations

import random

import pytest

from srkit.concepts import ResearchQuestion, SeedConcept, extract_seeds, load_stopwords
from srkit.context import (
    DEFAULT_RELATION_VOCAB,
    AuditEntry,
    ExpandedContext,
    KgTerm,
    RelationEdge,
    SafetyPolicy,
    apply_safety_filter,
    expand_context,
    parse_term_lines,
    suggest_lm_terms,
)
from srkit.errors import EmptyContextError, InputError, ProviderError
from srkit.llm import ChatRequest, MockProvider

from .conftest import FIXTURES

STOPWORDS = load_stopwords()


class FailingGateway:
    def complete(self, request: ChatRequest):
        raise ProviderError("gateway is down")


class ScriptGateway:
    """Maps a substring of the prompt to a canned response text."""

    def __init__(self, script: dict[str, str]):
        self.script = script
        self.prompts: list[str] = []

    def complete(self, request: ChatRequest):
        self.prompts.append(request.user_text)
        for key, text in self.script.items():
            if key in request.user_text:
                from srkit.llm import ChatResponse

                return ChatResponse(text=text, provider_id="script")
        from srkit.llm import ChatResponse

        return ChatResponse(text="", provider_id="script")


def _seed(surface="Hepatitis A", ui="D006506", name="Hepatitis A"):
    return SeedConcept(surface=surface, span=(0, len(surface)), descriptor_ui=ui, resolved_name=name)


class TestSuggestLmTerms:
    def test_three_line_response(self):
        gateway = ScriptGateway({"strongly associated": "Acetaminophen\nLiver\nVaccination"})
        terms = suggest_lm_terms(_seed(), gateway, max_terms=10)
        assert [t for t, _ in terms] == ["Acetaminophen", "Liver", "Vaccination"]

    def test_numbering_stripped(self):
        gateway = ScriptGateway({"strongly associated": "1. Acetaminophen"})
        terms = suggest_lm_terms(_seed(), gateway, max_terms=5)
        assert [t for t, _ in terms] == ["Acetaminophen"]

    def test_truncation_to_max_terms(self):
        fifty = "\n".join(f"term{i}" for i in range(50))
        gateway = ScriptGateway({"strongly associated": fifty})
        assert len(suggest_lm_terms(_seed(), gateway, max_terms=10)) == 10

    def test_long_lines_dropped(self):
        assert parse_term_lines("one two three four five six seven\nshort", 10) == ["short"]


class TestExpandContext:
    def _golden_gateway(self):
        return ScriptGateway(
            {
                "concepts strongly associated with Hepatitis A": "Acetaminophen",
                "relations for Hepatitis A": "Hepatitis A | associated with | Acetaminophen",
            }
        )

    def test_hepatitis_a_relations_and_lm_terms(self, core_kb):
        ctx = expand_context([_seed()], core_kb, self._golden_gateway())
        assert {e.predicate for e in ctx.relations if e.source == "kg"} == set(
            DEFAULT_RELATION_VOCAB
        )
        assert all(
            e.subject == "Hepatitis A" for e in ctx.relations if e.source == "kg"
        )
        assert "Acetaminophen" in [t for t, _ in ctx.lm_terms]

    def test_unresolved_seed_single_relation(self, core_kb):
        seed = SeedConcept(surface="mystery", span=(0, 7))
        ctx = expand_context(
            [seed], core_kb, ScriptGateway({}), relation_vocab=("causes",)
        )
        assert [e.predicate for e in ctx.relations] == ["causes"]
        assert ctx.kg_terms == []
        assert ctx.definitions == {}

    def test_kg_terms_match_per_seed_expansion_union(self, core_kb):
        # oracle: compose kb.expand per resolved seed and union the results
        question = ResearchQuestion(
            "Antimicrobial agents and suture techniques in preventing "
            "surgical site infections"
        )
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        ctx = expand_context(seeds, core_kb, ScriptGateway({}))
        expected = set()
        for seed in seeds:
            if seed.descriptor_ui is None:
                continue
            for t in core_kb.expand(seed.surface).terms:
                expected.add((t.term, t.provenance))
        assert {(t.term, t.provenance) for t in ctx.kg_terms} == expected

    def test_gateway_failure_degrades_to_kg_only(self, core_kb):
        ctx = expand_context([_seed()], core_kb, FailingGateway())
        assert "lm_unavailable" in ctx.flags
        assert ctx.lm_terms == []
        assert {e.predicate for e in ctx.relations} == set(DEFAULT_RELATION_VOCAB)
        kg_only = expand_context([_seed()], core_kb, ScriptGateway({}))
        assert [
            (t.term, t.provenance) for t in ctx.kg_terms
        ] == [(t.term, t.provenance) for t in kg_only.kg_terms]

    def test_definitions_for_resolved_seeds(self, core_kb):
        ctx = expand_context([_seed()], core_kb, ScriptGateway({}))
        assert "Hepatitis A" in ctx.definitions
        assert "fecal-oral" in ctx.definitions["Hepatitis A"]

    def test_empty_seed_list(self, core_kb):
        with pytest.raises(EmptyContextError):
            expand_context([], core_kb, ScriptGateway({}))

    def test_empty_relation_vocab(self, core_kb):
        with pytest.raises(InputError):
            expand_context([_seed()], core_kb, ScriptGateway({}), relation_vocab=())

    def test_lm_triples_filtered_by_vocab(self, core_kb):
        gateway = ScriptGateway(
            {
                "relations for Hepatitis A": (
                    "Hepatitis A | associated with | Acetaminophen\n"
                    "Hepatitis A | invented_relation | Liver\n"
                    "malformed line without pipes"
                )
            }
        )
        ctx = expand_context([_seed()], core_kb, gateway)
        lm_edges = [e for e in ctx.relations if e.source == "lm"]
        assert len(lm_edges) == 1
        assert lm_edges[0].object == "Acetaminophen"


def _fig1_context() -> ExpandedContext:
    seeds = [_seed()]
    ctx = ExpandedContext(seeds=seeds)
    ctx.kg_terms = [KgTerm("Hepatitis A", "self", "D006506")]
    ctx.lm_terms = [("Acetaminophen", "golden-chat")]
    for predicate in DEFAULT_RELATION_VOCAB:
        ctx.relations.append(RelationEdge("Hepatitis A", predicate, "[MASK]", "kg"))
    ctx.relations.append(
        RelationEdge("Hepatitis A", "associated with", "Acetaminophen", "lm")
    )
    ctx.definitions = {"Hepatitis A": "An acute infectious liver disease."}
    return ctx


class TestSafetyFilter:
    def test_empty_policy_is_identity(self):
        ctx = _fig1_context()
        filtered = apply_safety_filter(ctx, SafetyPolicy())
        assert filtered.kg_terms == ctx.kg_terms
        assert filtered.lm_terms == ctx.lm_terms
        assert filtered.relations == ctx.relations
        assert filtered.audit == ctx.audit == []

    def test_acetaminophen_block_under_misuse_profile(self):
        policy = SafetyPolicy.load(FIXTURES / "policies" / "misuse_prevention.json")
        assert policy.profile_id == "misuse-prevention"
        ctx = _fig1_context()
        ctx.relations = [e for e in ctx.relations if e.predicate != "complicates"]
        filtered = apply_safety_filter(ctx, policy)
        assert all(t != "Acetaminophen" for t, _ in filtered.lm_terms)
        term_audits = [a for a in filtered.audit if a.kind == "term"]
        assert len(term_audits) == 1
        assert term_audits[0].item == "Acetaminophen"
        assert term_audits[0].profile_id == "misuse-prevention"

    def test_wildcard_path_removes_exactly_complicates(self):
        ctx = _fig1_context()
        policy = SafetyPolicy(
            profile_id="p", blocked_paths=((("*"), "complicates", ("*")),)
        )
        filtered = apply_safety_filter(ctx, policy)
        # oracle: scan the edge list for pattern matches independently
        expected_removed = [e for e in ctx.relations if e.predicate == "complicates"]
        assert len(ctx.relations) - len(filtered.relations) == len(expected_removed)
        assert all(e.predicate != "complicates" for e in filtered.relations)
        assert len([a for a in filtered.audit if a.kind == "edge"]) == len(
            expected_removed
        )

    def test_filter_is_idempotent(self):
        ctx = _fig1_context()
        policy = SafetyPolicy(
            profile_id="p",
            blocked_terms=frozenset({"Acetaminophen"}),
            blocked_predicates=frozenset({"affects"}),
        )
        once = apply_safety_filter(ctx, policy)
        twice = apply_safety_filter(once, policy)
        assert once.kg_terms == twice.kg_terms
        assert once.lm_terms == twice.lm_terms
        assert once.relations == twice.relations
        assert once.audit == twice.audit

    def test_filtered_is_subset_with_matching_audit(self):
        ctx = _fig1_context()
        policy = SafetyPolicy(profile_id="p", blocked_terms=frozenset({"acetaminophen"}))
        filtered = apply_safety_filter(ctx, policy)
        assert set(t for t, _ in filtered.lm_terms) <= set(t for t, _ in ctx.lm_terms)
        removed = (
            len(ctx.kg_terms)
            - len(filtered.kg_terms)
            + len(ctx.lm_terms)
            - len(filtered.lm_terms)
            + len(ctx.relations)
            - len(filtered.relations)
        )
        assert len(filtered.audit) == removed

    def test_stricter_policies_keep_fewer_items(self):
        ctx = _fig1_context()
        p1 = SafetyPolicy(profile_id="lenient", blocked_terms=frozenset({"Acetaminophen"}))
        p2 = SafetyPolicy(
            profile_id="strict",
            blocked_terms=frozenset({"Acetaminophen", "Hepatitis A"}),
            blocked_predicates=frozenset({"causes"}),
        )
        s1 = apply_safety_filter(ctx, p1)
        s2 = apply_safety_filter(ctx, p2)
        assert {t for t, _ in s2.lm_terms} <= {t for t, _ in s1.lm_terms}
        assert {t.term for t in s2.kg_terms} <= {t.term for t in s1.kg_terms}
        assert set(s2.relations) <= set(s1.relations)

    def test_policy_file_round_trip(self, tmp_path):
        policy = SafetyPolicy(
            profile_id="x",
            blocked_terms=frozenset({"a"}),
            blocked_predicates=frozenset({"b"}),
            blocked_paths=((("s"), "p", ("o")),),
        )
        path = tmp_path / "policy.json"
        import json

        path.write_text(json.dumps(policy.to_dict()), encoding="utf-8")
        assert SafetyPolicy.load(path) == policy
