"""From research question to related queries, fully offline.

Seeds come from dictionary matching, the enriched context from the MeSH KB
plus a replayed chat cassette, and the related queries from the recorded
response (with deterministic templates as the no-model fallback).

Run from the repository root:  python demos/02_question_to_queries.py
"""

from pathlib import Path

from srkit import (
    ReplayProvider,
    ResearchQuestion,
    build_prompt,
    expand_context,
    extract_seeds,
    fallback_generate,
    generate_queries,
    ingest_descriptors,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

kb = ingest_descriptors(FIXTURES / "mesh_core.tsv")
gateway = ReplayProvider.from_file(FIXTURES / "cassettes" / "golden.jsonl")

question = ResearchQuestion("What are the causes of Hepatitis A?")
seeds = extract_seeds(question, kb)
print("seeds:")
for seed in seeds:
    state = seed.descriptor_ui or "unresolved"
    print(f"  {seed.surface!r} span={seed.span} -> {state}")

context = expand_context(seeds, kb, gateway, model_id="golden-chat")
print("\nrelations:")
for edge in context.relations:
    print(f"  {edge.subject} -[{edge.predicate}]-> {edge.object}  ({edge.source})")
print(f"lm terms: {[t for t, _ in context.lm_terms]}")
print(f"definitions: {context.definitions}")

print(f"\nprompt: {build_prompt(context, 5)}")
for query in generate_queries(context, gateway, n=5, model_id="golden-chat"):
    print(f"  {query.rank}. [{query.source}] {query.text}")

# The fallback needs no model at all and is deterministic.
print("\noffline fallback batch:")
for query in fallback_generate(context, 5):
    print(f"  {query.rank}. {query.text}")
