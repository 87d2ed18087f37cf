"""Chunk, embed, search, and fuse over the fixture corpus.

The offline embedder is a signed hashed bag-of-words (256 dims, unit norm),
and search is exact exhaustive cosine, so every number here is reproducible.

Run from the repository root:  python demos/04_passage_retrieval.py
"""

from pathlib import Path

import numpy as np

from srkit import (
    GeneratedQuery,
    HashedEmbedder,
    VectorIndex,
    chunk,
    fuse,
    load_corpus,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

corpus = load_corpus(FIXTURES / "corpus.jsonl")
embedder = HashedEmbedder(dim=256)

index = VectorIndex(dim=256)
for article in corpus:
    for passage in chunk(article, max_words=120, overlap_words=20):
        index.add(passage.passage_id, embedder.embed(passage.text))
print(f"indexed {len(index)} passages from {len(corpus)} articles")

queries = [
    "What are the causes of Hepatitis A and how is it diagnosed?",
    "What vaccination strategies prevent Hepatitis A infection?",
    "How does Hepatitis A affect liver function?",
]
per_query = []
for rank, text in enumerate(queries, start=1):
    hits = index.search(embedder.embed(text), k=8)
    per_query.append((GeneratedQuery(text, (), rank, "llm"), hits))
    print(f"\ntop passages for: {text}")
    for hit in hits[:3]:
        print(f"  #{hit.rank} {hit.passage_id} score={hit.score:.4f}")

fused = fuse(per_query, k=10)
print("\nreciprocal-rank fusion (articles):")
for pmid, score in fused:
    title = next(a.title for a in corpus if a.pmid == pmid)
    print(f"  {score:.5f} [{pmid}] {title[:60]}")

# Index snapshots round-trip through a small little-endian binary format.
snapshot = Path("/tmp/srkit-demo.srix")
index.save(snapshot)
reloaded = VectorIndex.load(snapshot)
assert reloaded.passage_ids == index.passage_ids
assert np.array_equal(reloaded.matrix(), index.matrix())
print(f"\nsnapshot round-trip OK ({snapshot.stat().st_size} bytes)")
snapshot.unlink()
