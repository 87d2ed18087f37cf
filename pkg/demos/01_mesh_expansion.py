"""Walk the MeSH fixture: lookup, hierarchy moves, and term expansion.

Run from the repository root:  python demos/01_mesh_expansion.py
"""

from pathlib import Path

from srkit import ExpansionPolicy, ingest_descriptors

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# Ingest the shipped TSV fixture (the same code reads NLM descriptor XML).
kb = ingest_descriptors(FIXTURES / "mesh_core.tsv")
print(f"knowledge base: {len(kb)} descriptors, {len(kb.tree_index)} tree numbers")

# Entry terms resolve to their preferred heading, case-folded.
for surface in ("suture", "Stitches, Surgical", "infections", "xyzzy"):
    hit = kb.lookup(surface)
    print(f"lookup({surface!r}) -> {hit.name if hit else 'no match'}")

# Hierarchy moves are driven by tree-number prefixes.
sutures = kb.lookup("Sutures")
print(f"\n{sutures.name} [{sutures.ui}] trees={list(sutures.tree_numbers)}")
print(f"  scope note: {sutures.scope_note}")
for direction in ("narrower", "broader", "sibling"):
    uis = kb.neighbors(sutures.ui, direction, depth=2)
    names = sorted(kb.descriptors[u].name for u in uis)
    print(f"  {direction:<9} -> {names}")

# Expansion bundles self + synonyms + descendants under one policy.
policy = ExpansionPolicy(include_narrower=True, narrower_depth=2, max_terms=25)
for seed in ("suture", "infections"):
    expansion = kb.expand(seed, policy)
    print(f"\nexpand({seed!r}): definition = {expansion.definition}")
    for term in expansion.terms:
        print(f"  {term.provenance:<11} {term.term}")
