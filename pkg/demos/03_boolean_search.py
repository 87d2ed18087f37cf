"""Boolean queries over the fixture corpus: build, render, parse, evaluate.

Run from the repository root:  python demos/03_boolean_search.py
"""

from pathlib import Path

from srkit import (
    FixtureClient,
    MockProvider,
    ResearchQuestion,
    build_boolean_query,
    expand_context,
    extract_seeds,
    ingest_descriptors,
    parse_query,
    render,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

kb = ingest_descriptors(FIXTURES / "mesh_core.tsv")
client = FixtureClient.from_file(FIXTURES / "corpus.jsonl")

question = ResearchQuestion(
    "Antimicrobial agents and suture techniques in preventing surgical site infections"
)
seeds = extract_seeds(question, kb)

# A canned mock with no entries fails on every prompt, which demonstrates the
# degraded path: the context stays KG-only and is flagged lm_unavailable.
context = expand_context(seeds, kb, MockProvider(canned={}, echo=False))
print(f"context flags: {context.flags}")

tree = build_boolean_query(context, per_seed_cap=2)
rendered = render(tree)
print(f"\nrendered query:\n  {rendered}")
assert parse_query(rendered) == tree  # the grammar round-trips

pmids = client.esearch(tree, retmax=20)
print(f"\nesearch -> {len(pmids)} pmids: {pmids}")

# Loosen the query: drop the AND blocks down to the suture group alone.
suture_only = parse_query('("Sutures"[MeSH Terms] OR "suture"[tiab])')
pmids = client.esearch(suture_only, retmax=20)
records, unknown = client.efetch(pmids)
print(f"\nsuture-only query -> {len(records)} articles (unknown: {unknown})")
for article in records[:5]:
    print(f"  [{article.pmid}] {article.title} ({article.pub_year})")
