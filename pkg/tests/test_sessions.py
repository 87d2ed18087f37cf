from __future__ import annotations

import datetime as dt
import json
from concurrent.futures import ThreadPoolExecutor

import pytest

from srkit.concepts import ResearchQuestion, SeedConcept
from srkit.context import AuditEntry, ExpandedContext, KgTerm, RelationEdge
from srkit.errors import (
    InputError,
    NotFoundError,
    RevisionConflictError,
    UnknownReferenceError,
)
from srkit.pipeline import Pipeline
from srkit.queries import GeneratedQuery, build_prompt
from srkit.sessions import (
    FeedbackEvent,
    ReviewSession,
    SessionStore,
    evaluate,
    new_session_id,
    refine_and_rerun,
    session_from_dict,
    session_to_dict,
)

from .conftest import GOLDEN_QUESTION, canonical_session


def _session(session_id="s1", revision=1) -> ReviewSession:
    seed = SeedConcept(
        surface="Hepatitis A", span=(23, 34), descriptor_ui="D006506", resolved_name="Hepatitis A"
    )
    ctx = ExpandedContext(
        seeds=[seed],
        kg_terms=[KgTerm("Hepatitis A", "self", "D006506")],
        lm_terms=[("Acetaminophen", "golden-chat")],
        relations=[RelationEdge("Hepatitis A", "causes", "[MASK]", "kg")],
        definitions={"Hepatitis A": "An acute infectious liver disease."},
        audit=[AuditEntry("term", "Ricin", "blocked term (lm)", "strict")],
        flags=[],
    )
    return ReviewSession(
        session_id=session_id,
        question=ResearchQuestion(GOLDEN_QUESTION),
        context=ctx,
        queries=[
            GeneratedQuery("What are the causes of Hepatitis A?", ("causes",), 1, "llm"),
            GeneratedQuery("How is Hepatitis A diagnosed?", ("causes",), 2, "llm"),
        ],
        boolean_query='("Hepatitis A"[tiab])',
        hits=[("90000001", 0.032), ("80000006", 0.016)],
        revision=revision,
    )


class TestStoreRoundTrip:
    def test_save_then_load_is_structurally_equal(self, tmp_path):
        store = SessionStore(tmp_path)
        session = _session()
        session.feedback.append(FeedbackEvent(pmid="90000001", verdict="relevant"))
        store.save_session(session)
        loaded = store.load_session("s1")
        assert session_to_dict(loaded) == session_to_dict(session)
        assert loaded.feedback == session.feedback

    def test_serialization_dict_round_trip(self):
        session = _session()
        assert session_to_dict(session_from_dict(session_to_dict(session))) == (
            session_to_dict(session)
        )

    def test_stale_revision_write_conflicts(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(_session(revision=1))
        store.save_session(_session(revision=2))
        with pytest.raises(RevisionConflictError):
            store.save_session(_session(revision=1))
        with pytest.raises(RevisionConflictError):
            store.save_session(_session(revision=2))

    def test_hundred_concurrent_saves_all_loadable(self, tmp_path):
        store = SessionStore(tmp_path)
        ids = [new_session_id() for _ in range(100)]

        def save(session_id: str) -> str:
            store.save_session(_session(session_id=session_id))
            return session_id

        with ThreadPoolExecutor(max_workers=16) as pool:
            list(pool.map(save, ids))
        # oracle: enumerate everything back out of the store
        assert sorted(store.list_sessions()) == sorted(ids)
        for session_id in ids:
            assert store.load_session(session_id).session_id == session_id

    def test_load_unknown_session(self, tmp_path):
        with pytest.raises(NotFoundError):
            SessionStore(tmp_path).load_session("nope")


class TestFeedback:
    def test_sentinel_verdict_grows_sentinel_set(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(_session())
        updated = store.record_feedback(
            "s1", FeedbackEvent(pmid="90000001", verdict="sentinel")
        )
        assert updated.sentinel_pmids == {"90000001"}
        assert store.load_session("s1").sentinel_pmids == {"90000001"}

    def test_two_events_same_pmid_kept_in_order(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(_session())
        store.record_feedback("s1", FeedbackEvent(pmid="90000001", verdict="relevant", comment="one"))
        updated = store.record_feedback(
            "s1", FeedbackEvent(pmid="90000001", verdict="irrelevant", comment="two")
        )
        assert [e.comment for e in updated.feedback] == ["one", "two"]
        timestamps = [e.timestamp for e in updated.feedback]
        assert timestamps == sorted(timestamps)

    def test_unknown_pmid_needs_force(self, tmp_path):
        store = SessionStore(tmp_path)
        store.save_session(_session())
        with pytest.raises(UnknownReferenceError):
            store.record_feedback("s1", FeedbackEvent(pmid="777", verdict="relevant"))
        updated = store.record_feedback(
            "s1", FeedbackEvent(pmid="777", verdict="relevant"), force=True
        )
        assert updated.feedback[-1].pmid == "777"

    def test_bad_verdict_rejected(self):
        with pytest.raises(InputError):
            FeedbackEvent(pmid="1", verdict="maybe")


class TestEvaluate:
    def test_full_overlap(self):
        hits = [(str(i), 1.0 / i) for i in range(1, 11)]
        sentinels = {"1", "2", "3", "4"}
        metrics = evaluate(hits, sentinels, k=10)
        assert metrics.recall_at_k == 1.0
        assert metrics.sentinel_found == 4
        assert metrics.sentinel_total == 4

    def test_disjoint_sets(self):
        metrics = evaluate([("1", 1.0)], {"9"}, k=5)
        assert metrics.recall_at_k == 0.0
        assert metrics.precision_at_k == 0.0

    def test_hand_counted_example(self):
        # oracle: |top-3 of [a,b,c,d] ∩ {b,d,e}| = |{b}| = 1
        metrics = evaluate(["a1", "b2", "c3", "d4"], {"b2", "d4", "e5"}, k=3)
        assert metrics.recall_at_k == pytest.approx(1 / 3)
        assert metrics.precision_at_k == pytest.approx(1 / 3)

    def test_recall_non_decreasing_in_k(self):
        hits = [str(i) for i in range(1, 21)]
        sentinels = {"3", "9", "15"}
        values = [evaluate(hits, sentinels, k).recall_at_k for k in range(1, 21)]
        assert values == sorted(values)

    def test_empty_sentinels_is_an_input_error(self):
        with pytest.raises(InputError):
            evaluate(["1"], set(), k=3)

    def test_score_changes_do_not_change_metrics(self):
        hits_a = [("1", 0.9), ("2", 0.5)]
        hits_b = [("1", 0.1), ("2", 0.05)]
        assert evaluate(hits_a, {"2"}, 2) == evaluate(hits_b, {"2"}, 2)


class TestRefineAndRerun:
    @pytest.fixture()
    def pipeline(self, golden_config):
        return Pipeline(golden_config)

    @pytest.fixture()
    def run_session(self, pipeline):
        return pipeline.run(GOLDEN_QUESTION)

    def test_remove_query_shrinks_batch_and_recomputes(self, pipeline, run_session):
        n = len(run_session.queries)
        refined = refine_and_rerun(
            pipeline.store,
            run_session.session_id,
            [{"op": "remove_query", "rank": 2}],
            pipeline,
        )
        assert refined.revision == 2
        assert len(refined.queries) == n - 1
        assert [q.rank for q in refined.queries] == list(range(1, n))
        assert refined.hits  # recomputed, still non-empty

    def test_empty_edit_list_bumps_revision_with_identical_outputs(
        self, pipeline, run_session
    ):
        refined = refine_and_rerun(
            pipeline.store, run_session.session_id, [], pipeline
        )
        assert refined.revision == run_session.revision + 1
        before = canonical_session(session_to_dict(run_session))
        after = canonical_session(session_to_dict(refined))
        before["revision"] = after["revision"] = None
        assert json.dumps(before, sort_keys=True) == json.dumps(after, sort_keys=True)

    def test_block_term_edit_audits_and_excludes_from_prompt(
        self, pipeline, run_session
    ):
        audits_before = len(run_session.context.audit)
        refined = refine_and_rerun(
            pipeline.store,
            run_session.session_id,
            [{"op": "block_term", "term": "Acetaminophen"}],
            pipeline,
        )
        new_audits = refined.context.audit[audits_before:]
        assert len(new_audits) == 1
        assert new_audits[0].item == "Acetaminophen"
        # oracle: the prompt string of the rerun batch
        prompt = build_prompt(refined.context, len(refined.queries) or 5)
        assert "Acetaminophen" not in prompt
        # regeneration hit a cassette miss and fell back to templates
        assert all(q.source == "fallback" for q in refined.queries)

    def test_edit_query_text(self, pipeline, run_session):
        refined = refine_and_rerun(
            pipeline.store,
            run_session.session_id,
            [{"op": "edit_query", "rank": 1, "text": "Hepatitis A incubation period?"}],
            pipeline,
        )
        assert refined.queries[0].text == "Hepatitis A incubation period?"

    def test_edit_referencing_missing_item(self, pipeline, run_session):
        with pytest.raises(UnknownReferenceError):
            refine_and_rerun(
                pipeline.store,
                run_session.session_id,
                [{"op": "remove_query", "rank": 99}],
                pipeline,
            )
        with pytest.raises(UnknownReferenceError):
            refine_and_rerun(
                pipeline.store,
                run_session.session_id,
                [{"op": "remove_term", "term": "not-in-context"}],
                pipeline,
            )

    def test_stale_expected_revision_conflicts(self, pipeline, run_session):
        refine_and_rerun(pipeline.store, run_session.session_id, [], pipeline)
        with pytest.raises(RevisionConflictError):
            refine_and_rerun(
                pipeline.store,
                run_session.session_id,
                [],
                pipeline,
                expected_revision=1,
            )

    def test_history_is_append_only(self, pipeline, run_session):
        store = pipeline.store
        rev1_path = store._rev_path(run_session.session_id, 1)
        before = rev1_path.read_bytes()
        refine_and_rerun(store, run_session.session_id, [], pipeline)
        assert rev1_path.read_bytes() == before
        assert store.revisions(run_session.session_id) == [1, 2]

    def test_feedback_survives_refinement(self, pipeline, run_session):
        store = pipeline.store
        store.record_feedback(
            run_session.session_id,
            FeedbackEvent(pmid=run_session.hits[0][0], verdict="sentinel"),
        )
        refined = refine_and_rerun(store, run_session.session_id, [], pipeline)
        assert refined.sentinel_pmids == {run_session.hits[0][0]}
        assert len(refined.feedback) == 1
