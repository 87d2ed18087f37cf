"""Related-query generation from an expanded context.

The prompt follows the fixed keyword template; responses may come back
numbered, bulleted, or as plain lines. A deterministic template fallback
keeps the pipeline runnable with no model and no network.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .context import ExpandedContext
from .errors import GatewayError, GenerationError, InputError
from .llm import ChatRequest
from .mesh import normalize_term

DEFAULT_N_QUERIES = 5
MAX_N_QUERIES = 20
PROMPT_KEYWORD_CAP = 12

_LIST_MARKER_RE = re.compile(r"^\s*(?:[-*•·]|\(?\d{1,3}[.)\]:]?)\s+")


@dataclass(frozen=True)
class GeneratedQuery:
    text: str
    origin_keywords: tuple[str, ...]
    rank: int
    source: str  # llm | fallback


def prompt_keywords(context: ExpandedContext) -> list[str]:
    """Predicates, then LM terms, then KG terms; deduplicated, capped at 12.

    The seed concept itself (provenance ``self``) stays out of the keyword
    list; the worked example prompt carries only relations and LM terms.
    """
    keywords: list[str] = []
    seen: set[str] = set()

    def add(term: str) -> None:
        key = normalize_term(term)
        if key and key not in seen:
            seen.add(key)
            keywords.append(term)

    for edge in context.relations:
        add(edge.predicate)
    for term, _ in context.lm_terms:
        add(term)
    for kg in context.kg_terms:
        if kg.provenance != "self":
            add(kg.term)
    return keywords[:PROMPT_KEYWORD_CAP]


def build_prompt(context: ExpandedContext, n: int = DEFAULT_N_QUERIES) -> str:
    if n < 1:
        raise InputError("n must be >= 1")
    keywords = prompt_keywords(context)
    if not keywords:
        raise InputError("context yields no prompt keywords")
    return f"Formulate {n} prompt queries with the keywords: {', '.join(keywords)}"


def parse_query_lines(text: str) -> list[str]:
    """Accept numbered, bulleted, or bare lines; strip markers and quotes."""
    queries = []
    for line in text.splitlines():
        q = _LIST_MARKER_RE.sub("", line).strip()
        q = q.strip("\"'").strip()
        if q:
            queries.append(q)
    return queries


def fallback_generate(context: ExpandedContext, n: int) -> list[GeneratedQuery]:
    """Deterministic templates over (seed x predicate), then LM-term pairs."""
    if n < 1:
        raise InputError("n must be >= 1")
    if not context.seeds:
        raise InputError("context has no seeds")

    keywords = tuple(prompt_keywords(context))
    texts: list[str] = []
    seen: set[str] = set()

    def add(text: str) -> None:
        key = normalize_term(text)
        if key not in seen:
            seen.add(key)
            texts.append(text)

    for seed_name in context.seed_names:
        for edge in context.relations:
            if edge.source != "kg" or normalize_term(edge.subject) != normalize_term(
                seed_name
            ):
                continue
            predicate = edge.predicate
            if predicate == "diagnoses":
                add(f"How is {seed_name} {predicate}?")
            elif predicate.endswith("with"):
                add(f"What is {seed_name} {predicate}?")
            else:
                add(f"What are the {predicate} of {seed_name}?")
    for seed_name in context.seed_names:
        for term, _ in context.lm_terms:
            add(f"{term} and {seed_name}: what is the relationship?")

    return [
        GeneratedQuery(text=t, origin_keywords=keywords, rank=i, source="fallback")
        for i, t in enumerate(texts[:n], start=1)
    ]


def generate_queries(
    context: ExpandedContext,
    gateway,
    n: int = DEFAULT_N_QUERIES,
    model_id: str = "offline-fixture",
) -> list[GeneratedQuery]:
    """Prompt the gateway for n related queries, topping up from fallback.

    A dead gateway yields a full fallback batch; duplicate texts (case
    insensitive) never appear twice in one batch.
    """
    if not 1 <= n <= MAX_N_QUERIES:
        raise InputError(f"n must be in [1, {MAX_N_QUERIES}]")
    prompt = build_prompt(context, n)
    keywords = tuple(prompt_keywords(context))

    parsed: list[str] = []
    source = "llm"
    try:
        response = gateway.complete(ChatRequest(user_text=prompt, model_id=model_id))
        parsed = parse_query_lines(response.text)
    except GatewayError:
        source = "fallback"

    batch: list[GeneratedQuery] = []
    seen: set[str] = set()
    for text in parsed:
        key = normalize_term(text)
        if key in seen:
            continue
        seen.add(key)
        batch.append(
            GeneratedQuery(
                text=text,
                origin_keywords=keywords,
                rank=len(batch) + 1,
                source=source,
            )
        )
        if len(batch) == n:
            break

    if len(batch) < n:
        try:
            for fb in fallback_generate(context, n + len(batch)):
                if normalize_term(fb.text) in seen:
                    continue
                seen.add(normalize_term(fb.text))
                batch.append(
                    GeneratedQuery(
                        text=fb.text,
                        origin_keywords=keywords,
                        rank=len(batch) + 1,
                        source="fallback",
                    )
                )
                if len(batch) == n:
                    break
        except InputError:
            pass

    if not batch:
        raise GenerationError("no queries parsed and fallback produced nothing")
    return batch
