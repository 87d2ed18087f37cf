"""Enriched context for seed concepts: KG terms, relations, LM suggestions.

The knowledge-graph side comes from the MeSH KB; the language-model side is
a pair of cloze-style prompts through the chat gateway (one for associated
terms, one for structured relation triples). A glob-based safety policy is
applied last so blocked material never reaches downstream prompts.
"""

from __future__ import annotations

import fnmatch
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .concepts import SeedConcept
from .errors import EmptyContextError, GatewayError, InputError
from .llm import ChatRequest
from .mesh import ExpansionPolicy, MeshKb, normalize_term

# The five Fig-style relation labels used when no vocabulary is configured.
DEFAULT_RELATION_VOCAB = (
    "causes",
    "diagnoses",
    "affects",
    "associated with",
    "complicates",
)

DEFAULT_LM_MAX_TERMS = 10
MAX_TERM_TOKENS = 6

_LIST_MARKER_RE = re.compile(r"^\s*(?:[-*•·]|\(?\d{1,3}[.)\]:]?)\s*")


@dataclass(frozen=True)
class RelationEdge:
    subject: str
    predicate: str
    object: str
    source: str = "kg"  # kg | lm

    def __post_init__(self):
        if normalize_term(self.subject) == normalize_term(self.object):
            raise InputError("relation subject and object must differ")


@dataclass(frozen=True)
class KgTerm:
    term: str
    provenance: str  # self | entry_term | broader | narrower
    seed_ui: str


@dataclass(frozen=True)
class AuditEntry:
    kind: str  # term | edge
    item: str
    reason: str
    profile_id: str


@dataclass
class ExpandedContext:
    seeds: list[SeedConcept]
    kg_terms: list[KgTerm] = field(default_factory=list)
    lm_terms: list[tuple[str, str]] = field(default_factory=list)  # (term, model id)
    relations: list[RelationEdge] = field(default_factory=list)
    definitions: dict[str, str] = field(default_factory=dict)
    audit: list[AuditEntry] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def seed_names(self) -> list[str]:
        return [s.display_name for s in self.seeds]


@dataclass(frozen=True)
class SafetyPolicy:
    profile_id: str = "open-research"
    blocked_terms: frozenset[str] = frozenset()
    blocked_predicates: frozenset[str] = frozenset()
    blocked_paths: tuple[tuple[str, str, str], ...] = ()

    @property
    def is_identity(self) -> bool:
        return not (self.blocked_terms or self.blocked_predicates or self.blocked_paths)

    @classmethod
    def from_dict(cls, obj: dict) -> "SafetyPolicy":
        paths = []
        for p in obj.get("blocked_paths", []):
            if len(p) != 3:
                raise InputError(f"blocked path must have 3 elements, got {p!r}")
            paths.append((str(p[0]), str(p[1]), str(p[2])))
        return cls(
            profile_id=str(obj.get("profile_id", "unnamed")),
            blocked_terms=frozenset(str(t) for t in obj.get("blocked_terms", [])),
            blocked_predicates=frozenset(
                str(t) for t in obj.get("blocked_predicates", [])
            ),
            blocked_paths=tuple(paths),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SafetyPolicy":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "profile_id": self.profile_id,
            "blocked_terms": sorted(self.blocked_terms),
            "blocked_predicates": sorted(self.blocked_predicates),
            "blocked_paths": [list(p) for p in self.blocked_paths],
        }


def parse_term_lines(text: str, max_terms: int) -> list[str]:
    """One concept per line; numbering/bullets stripped, long lines dropped."""
    terms: list[str] = []
    for line in text.splitlines():
        term = _LIST_MARKER_RE.sub("", line).strip().strip("\"'")
        if not term or len(term.split()) > MAX_TERM_TOKENS:
            continue
        terms.append(term)
        if len(terms) >= max_terms:
            break
    return terms


def _term_prompt(seed_name: str, max_terms: int) -> str:
    return (
        f"List up to {max_terms} single medical concepts strongly associated "
        f"with {seed_name}, one per line, no commentary."
    )


def _triple_prompt(seed_name: str, relation_vocab: tuple[str, ...]) -> str:
    return (
        f"List relations for {seed_name} as subject | predicate | object, one "
        f"per line, using only these predicates: {', '.join(relation_vocab)}. "
        "No commentary."
    )


def suggest_lm_terms(
    seed: SeedConcept | str,
    gateway,
    max_terms: int = DEFAULT_LM_MAX_TERMS,
    model_id: str = "offline-fixture",
) -> list[tuple[str, str]]:
    """Cloze-style associated-term suggestions, at most ``max_terms``."""
    terms, _ = _suggest_lm_terms(seed, gateway, max_terms, model_id)
    return terms


def _suggest_lm_terms(seed, gateway, max_terms, model_id):
    if max_terms < 1:
        raise InputError("max_terms must be >= 1")
    seed_name = seed.display_name if isinstance(seed, SeedConcept) else str(seed)
    response = gateway.complete(
        ChatRequest(user_text=_term_prompt(seed_name, max_terms), model_id=model_id)
    )
    terms = parse_term_lines(response.text, max_terms)
    parse_warning = bool(response.text.strip()) and not terms
    return [(t, model_id) for t in terms], parse_warning


def _propose_lm_triples(seed_name, gateway, relation_vocab, model_id):
    """LM relation triples, keeping only predicates from the vocabulary."""
    response = gateway.complete(
        ChatRequest(
            user_text=_triple_prompt(seed_name, tuple(relation_vocab)),
            model_id=model_id,
        )
    )
    vocab_by_norm = {normalize_term(p): p for p in relation_vocab}
    edges = []
    for line in response.text.splitlines():
        parts = [p.strip() for p in _LIST_MARKER_RE.sub("", line).split("|")]
        if len(parts) != 3 or not all(parts):
            continue
        predicate = vocab_by_norm.get(normalize_term(parts[1]))
        if predicate is None:
            continue
        if normalize_term(parts[0]) == normalize_term(parts[2]):
            continue
        edges.append(RelationEdge(parts[0], predicate, parts[2], source="lm"))
    return edges


def expand_context(
    seeds: list[SeedConcept],
    kb: MeshKb,
    gateway,
    relation_vocab: tuple[str, ...] = DEFAULT_RELATION_VOCAB,
    policy: SafetyPolicy | None = None,
    expansion_policy: ExpansionPolicy | None = None,
    lm_max_terms: int = DEFAULT_LM_MAX_TERMS,
    model_id: str = "offline-fixture",
) -> ExpandedContext:
    """Merge per-seed KG expansions, relation edges, and LM suggestions.

    Gateway failures degrade to a KG-only context flagged ``lm_unavailable``.
    Safety filtering runs last so blocked items never reach query prompts.
    """
    if not seeds:
        raise EmptyContextError("no seed concepts to expand")
    if not relation_vocab:
        raise InputError("relation_vocab must be non-empty")
    policy = policy or SafetyPolicy()

    ctx = ExpandedContext(seeds=list(seeds))
    seen_kg: set[tuple[str, str]] = set()
    for seed in seeds:
        if seed.descriptor_ui is None:
            continue
        expansion = kb.expand(seed.surface, expansion_policy)
        ctx.definitions[expansion.seed_name] = expansion.definition
        for et in expansion.terms:
            key = (et.term, et.provenance)
            if key not in seen_kg:
                seen_kg.add(key)
                ctx.kg_terms.append(KgTerm(et.term, et.provenance, expansion.seed_ui))

    # One open edge per (seed, vocabulary predicate); the object slot stays a
    # mask token until an LM or KG instantiates it.
    for seed in seeds:
        for predicate in relation_vocab:
            ctx.relations.append(
                RelationEdge(
                    subject=seed.display_name,
                    predicate=predicate,
                    object="[MASK]",
                    source="kg",
                )
            )

    lm_ok = True
    seen_lm: set[str] = set()
    for seed in seeds:
        try:
            terms, warned = _suggest_lm_terms(seed, gateway, lm_max_terms, model_id)
        except GatewayError:
            lm_ok = False
            break
        if warned and "lm_parse_warning" not in ctx.flags:
            ctx.flags.append("lm_parse_warning")
        for term, mid in terms:
            if normalize_term(term) not in seen_lm:
                seen_lm.add(normalize_term(term))
                ctx.lm_terms.append((term, mid))
        try:
            ctx.relations.extend(
                _propose_lm_triples(seed.display_name, gateway, relation_vocab, model_id)
            )
        except GatewayError:
            lm_ok = False
            break
    if not lm_ok:
        ctx.lm_terms = []
        ctx.relations = [e for e in ctx.relations if e.source == "kg"]
        ctx.flags.append("lm_unavailable")

    seen_edges: set[tuple[str, str, str, str]] = set()
    deduped = []
    for e in ctx.relations:
        key = (
            normalize_term(e.subject),
            normalize_term(e.predicate),
            normalize_term(e.object),
            e.source,
        )
        if key not in seen_edges:
            seen_edges.add(key)
            deduped.append(e)
    ctx.relations = deduped

    return apply_safety_filter(ctx, policy)


def _glob_match(pattern: str, value: str) -> bool:
    return fnmatch.fnmatchcase(normalize_term(value), normalize_term(pattern))


def apply_safety_filter(context: ExpandedContext, policy: SafetyPolicy) -> ExpandedContext:
    """Drop blocked terms/edges, appending one audit entry per removal.

    Term and predicate blocks match case-folded; path patterns additionally
    allow ``*`` globs. Idempotent: filtering a filtered context changes
    nothing.
    """
    blocked_terms = {normalize_term(t) for t in policy.blocked_terms}
    blocked_predicates = {normalize_term(p) for p in policy.blocked_predicates}

    audit = list(context.audit)

    def term_survives(term: str, label: str) -> bool:
        if normalize_term(term) in blocked_terms:
            audit.append(
                AuditEntry("term", term, f"blocked term ({label})", policy.profile_id)
            )
            return False
        return True

    kg_terms = [t for t in context.kg_terms if term_survives(t.term, "kg")]
    lm_terms = [t for t in context.lm_terms if term_survives(t[0], "lm")]

    relations = []
    for edge in context.relations:
        desc = f"{edge.subject} -[{edge.predicate}]-> {edge.object}"
        if normalize_term(edge.predicate) in blocked_predicates:
            audit.append(
                AuditEntry("edge", desc, "blocked predicate", policy.profile_id)
            )
            continue
        blocked_by = next(
            (
                p
                for p in policy.blocked_paths
                if _glob_match(p[0], edge.subject)
                and _glob_match(p[1], edge.predicate)
                and _glob_match(p[2], edge.object)
            ),
            None,
        )
        if blocked_by is not None:
            audit.append(
                AuditEntry(
                    "edge",
                    desc,
                    f"blocked path {list(blocked_by)}",
                    policy.profile_id,
                )
            )
            continue
        relations.append(edge)

    return ExpandedContext(
        seeds=list(context.seeds),
        kg_terms=kg_terms,
        lm_terms=lm_terms,
        relations=relations,
        definitions=dict(context.definitions),
        audit=audit,
        flags=list(context.flags),
    )
