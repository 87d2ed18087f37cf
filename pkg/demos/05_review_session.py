"""A full librarian review session: run, give feedback, score, refine.

Run from the repository root:  python demos/05_review_session.py
"""

import tempfile
from pathlib import Path

from srkit import FeedbackEvent, Pipeline, PipelineConfig, evaluate, refine_and_rerun

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

workdir = tempfile.mkdtemp(prefix="srkit-demo-")
config = PipelineConfig(
    kb_source=str(FIXTURES / "mesh_core.tsv"),
    provider="replay",
    cassette_path=str(FIXTURES / "cassettes" / "golden.jsonl"),
    pubmed_mode="fixture",
    corpus_path=str(FIXTURES / "corpus.jsonl"),
    sessions_dir=f"{workdir}/sessions",
    model_id="golden-chat",
)

pipeline = Pipeline(config)
session = pipeline.run("What are the causes of Hepatitis A?")
print(f"session {session.session_id} rev {session.revision}")
print(f"boolean query: {session.boolean_query}")
for query in session.queries:
    print(f"  {query.rank}. [{query.source}] {query.text}")
print("top articles:")
for pmid, score in session.hits[:5]:
    print(f"  {score:.5f} {pmid}")

# The librarian marks known-relevant ground truth articles as sentinels.
for pmid in ("90000001", "90000003"):
    pipeline.store.record_feedback(
        session.session_id,
        FeedbackEvent(pmid=pmid, verdict="sentinel", comment="known ground truth"),
    )
current = pipeline.store.load_session(session.session_id)
metrics = evaluate(current.hits, current.sentinel_pmids, k=10)
print(f"\nrecall@10 = {metrics.recall_at_k:.2f}  precision@10 = {metrics.precision_at_k:.2f}")

# Refining re-executes downstream stages and writes revision 2; revision 1
# stays on disk untouched.
refined = refine_and_rerun(
    pipeline.store,
    session.session_id,
    [{"op": "remove_query", "rank": 5}],
    pipeline,
)
print(f"\nafter refine: rev {refined.revision}, {len(refined.queries)} queries")
print(f"revisions on disk: {pipeline.store.revisions(session.session_id)}")
print(f"sentinels carried over: {sorted(refined.sentinel_pmids)}")
