"""Review sessions: versioned persistence, feedback, sentinel metrics.

One JSON document per revision under ``sessions/{id}/rev-{n}.json`` plus an
append-only ``feedback.jsonl`` event log, so no operation ever rewrites an
existing revision. Refinement copies the session, applies the librarian's
edits, re-executes the affected pipeline stages, and writes revision n+1.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .concepts import ResearchQuestion, SeedConcept
from .context import AuditEntry, ExpandedContext, KgTerm, RelationEdge
from .errors import (
    InputError,
    NotFoundError,
    RevisionConflictError,
    StorageError,
    UnknownReferenceError,
)
from .queries import GeneratedQuery

SCHEMA_VERSION = "v1"
VERDICTS = ("relevant", "irrelevant", "sentinel")


def utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


def new_session_id() -> str:
    return uuid.uuid4().hex


@dataclass(frozen=True)
class FeedbackEvent:
    pmid: str
    verdict: str
    comment: str = ""
    timestamp: dt.datetime = field(default_factory=utcnow)
    actor: str = "librarian"

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise InputError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if not self.pmid:
            raise InputError("feedback pmid must be non-empty")


@dataclass(frozen=True)
class Metrics:
    k: int
    recall_at_k: float
    precision_at_k: float
    sentinel_found: int
    sentinel_total: int

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "recall_at_k": self.recall_at_k,
            "precision_at_k": self.precision_at_k,
            "sentinel_found": self.sentinel_found,
            "sentinel_total": self.sentinel_total,
        }


@dataclass
class ReviewSession:
    session_id: str
    question: ResearchQuestion
    created_at: dt.datetime = field(default_factory=utcnow)
    context: ExpandedContext | None = None
    queries: list[GeneratedQuery] = field(default_factory=list)
    boolean_query: str = ""
    hits: list[tuple[str, float]] = field(default_factory=list)
    feedback: list[FeedbackEvent] = field(default_factory=list)
    sentinel_pmids: set[str] = field(default_factory=set)
    revision: int = 1
    failure: dict | None = None

    @property
    def hit_pmids(self) -> list[str]:
        return [pmid for pmid, _ in self.hits]


def evaluate(hits: Sequence, sentinels: set[str], k: int) -> Metrics:
    """Recall@k and precision@k of a fused ranking against sentinel pmids."""
    if k < 1:
        raise InputError("k must be >= 1")
    if not sentinels:
        raise InputError("sentinel set must be non-empty")
    pmids = [h[0] if isinstance(h, (tuple, list)) else str(h) for h in hits]
    top = pmids[:k]
    found = len(set(top) & set(sentinels))
    denom = min(k, len(pmids))
    return Metrics(
        k=k,
        recall_at_k=found / len(sentinels),
        precision_at_k=found / denom if denom else 0.0,
        sentinel_found=found,
        sentinel_total=len(sentinels),
    )


# --- serialization -----------------------------------------------------------


def session_to_dict(session: ReviewSession) -> dict:
    ctx = session.context
    return {
        "schema": SCHEMA_VERSION,
        "session_id": session.session_id,
        "created_at": session.created_at.isoformat(),
        "revision": session.revision,
        "question": {
            "text": session.question.text,
            "language_tag": session.question.language_tag,
        },
        "context": None
        if ctx is None
        else {
            "seeds": [
                {
                    "surface": s.surface,
                    "span": list(s.span),
                    "descriptor_ui": s.descriptor_ui,
                    "resolved_name": s.resolved_name,
                }
                for s in ctx.seeds
            ],
            "kg_terms": [
                {"term": t.term, "provenance": t.provenance, "seed_ui": t.seed_ui}
                for t in ctx.kg_terms
            ],
            "lm_terms": [{"term": t, "model_id": m} for t, m in ctx.lm_terms],
            "relations": [
                {
                    "subject": e.subject,
                    "predicate": e.predicate,
                    "object": e.object,
                    "source": e.source,
                }
                for e in ctx.relations
            ],
            "definitions": dict(ctx.definitions),
            "audit": [
                {
                    "kind": a.kind,
                    "item": a.item,
                    "reason": a.reason,
                    "profile_id": a.profile_id,
                }
                for a in ctx.audit
            ],
            "flags": list(ctx.flags),
        },
        "queries": [
            {
                "text": q.text,
                "origin_keywords": list(q.origin_keywords),
                "rank": q.rank,
                "source": q.source,
            }
            for q in session.queries
        ],
        "boolean_query": session.boolean_query,
        "hits": [[pmid, score] for pmid, score in session.hits],
        "sentinel_pmids": sorted(session.sentinel_pmids),
        "failure": session.failure,
    }


def session_from_dict(obj: dict, feedback: list[FeedbackEvent] | None = None) -> ReviewSession:
    if obj.get("schema") != SCHEMA_VERSION:
        raise StorageError(f"unsupported session schema {obj.get('schema')!r}")
    ctx_obj = obj.get("context")
    context = None
    if ctx_obj is not None:
        context = ExpandedContext(
            seeds=[
                SeedConcept(
                    surface=s["surface"],
                    span=tuple(s["span"]),
                    descriptor_ui=s.get("descriptor_ui"),
                    resolved_name=s.get("resolved_name"),
                )
                for s in ctx_obj["seeds"]
            ],
            kg_terms=[
                KgTerm(t["term"], t["provenance"], t["seed_ui"])
                for t in ctx_obj["kg_terms"]
            ],
            lm_terms=[(t["term"], t["model_id"]) for t in ctx_obj["lm_terms"]],
            relations=[
                RelationEdge(e["subject"], e["predicate"], e["object"], e["source"])
                for e in ctx_obj["relations"]
            ],
            definitions=dict(ctx_obj["definitions"]),
            audit=[
                AuditEntry(a["kind"], a["item"], a["reason"], a["profile_id"])
                for a in ctx_obj["audit"]
            ],
            flags=list(ctx_obj["flags"]),
        )
    session = ReviewSession(
        session_id=obj["session_id"],
        question=ResearchQuestion(**obj["question"]),
        created_at=dt.datetime.fromisoformat(obj["created_at"]),
        context=context,
        queries=[
            GeneratedQuery(
                text=q["text"],
                origin_keywords=tuple(q["origin_keywords"]),
                rank=q["rank"],
                source=q["source"],
            )
            for q in obj["queries"]
        ],
        boolean_query=obj.get("boolean_query", ""),
        hits=[(pmid, float(score)) for pmid, score in obj.get("hits", [])],
        sentinel_pmids=set(obj.get("sentinel_pmids", [])),
        revision=obj["revision"],
        failure=obj.get("failure"),
    )
    if feedback:
        session.feedback = list(feedback)
        for event in feedback:
            if event.verdict == "sentinel":
                session.sentinel_pmids.add(event.pmid)
    return session


def _event_to_dict(event: FeedbackEvent) -> dict:
    return {
        "pmid": event.pmid,
        "verdict": event.verdict,
        "comment": event.comment,
        "timestamp": event.timestamp.isoformat(),
        "actor": event.actor,
    }


def _event_from_dict(obj: dict) -> FeedbackEvent:
    return FeedbackEvent(
        pmid=obj["pmid"],
        verdict=obj["verdict"],
        comment=obj.get("comment", ""),
        timestamp=dt.datetime.fromisoformat(obj["timestamp"]),
        actor=obj.get("actor", "librarian"),
    )


# --- store -------------------------------------------------------------------


class SessionStore:
    """Directory-backed store, one subdirectory per session.

    Revision writes are conflict-checked under a per-session lock, so stale
    writers get a RevisionConflictError instead of clobbering newer state.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def _rev_path(self, session_id: str, revision: int) -> Path:
        return self._dir(session_id) / f"rev-{revision}.json"

    def _feedback_path(self, session_id: str) -> Path:
        return self._dir(session_id) / "feedback.jsonl"

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def revisions(self, session_id: str) -> list[int]:
        d = self._dir(session_id)
        if not d.is_dir():
            return []
        revs = []
        for p in d.glob("rev-*.json"):
            try:
                revs.append(int(p.stem.split("-", 1)[1]))
            except ValueError:
                continue
        return sorted(revs)

    def latest_revision(self, session_id: str) -> int | None:
        revs = self.revisions(session_id)
        return revs[-1] if revs else None

    def save_session(self, session: ReviewSession) -> str:
        with self._lock(session.session_id):
            stored = self.latest_revision(session.session_id)
            if stored is not None and session.revision <= stored:
                raise RevisionConflictError(session.session_id, session.revision, stored)
            self._dir(session.session_id).mkdir(parents=True, exist_ok=True)
            path = self._rev_path(session.session_id, session.revision)
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(
                json.dumps(session_to_dict(session), ensure_ascii=False, indent=2),
                encoding="utf-8",
            )
            tmp.replace(path)
            self._sync_feedback_log(session)
        return session.session_id

    def _sync_feedback_log(self, session: ReviewSession) -> None:
        log_path = self._feedback_path(session.session_id)
        existing = self._load_feedback(session.session_id)
        if session.feedback[: len(existing)] != existing:
            raise StorageError(
                f"feedback log of {session.session_id} diverged from session copy"
            )
        tail = session.feedback[len(existing) :]
        if tail:
            with open(log_path, "a", encoding="utf-8") as fh:
                for event in tail:
                    fh.write(json.dumps(_event_to_dict(event), ensure_ascii=False) + "\n")

    def _load_feedback(self, session_id: str) -> list[FeedbackEvent]:
        path = self._feedback_path(session_id)
        if not path.exists():
            return []
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(_event_from_dict(json.loads(line)))
        return events

    def load_session(self, session_id: str, revision: int | None = None) -> ReviewSession:
        if revision is None:
            revision = self.latest_revision(session_id)
            if revision is None:
                raise NotFoundError(f"unknown session {session_id!r}")
        path = self._rev_path(session_id, revision)
        if not path.exists():
            raise NotFoundError(f"session {session_id!r} has no revision {revision}")
        obj = json.loads(path.read_text("utf-8"))
        return session_from_dict(obj, feedback=self._load_feedback(session_id))

    def record_feedback(
        self, session_id: str, event: FeedbackEvent, force: bool = False
    ) -> ReviewSession:
        """Append one event; sentinel verdicts also grow the sentinel set.

        The pmid must be part of the session's hits unless ``force`` marks it
        as explicitly added.
        """
        with self._lock(session_id):
            session = self.load_session(session_id)
            known = set(session.hit_pmids) | {e.pmid for e in session.feedback}
            if event.pmid not in known and not force:
                raise UnknownReferenceError(
                    f"pmid {event.pmid} is not among the session's articles "
                    "(pass force to add it anyway)"
                )
            if session.feedback and event.timestamp < session.feedback[-1].timestamp:
                event = replace(event, timestamp=session.feedback[-1].timestamp)
            with open(self._feedback_path(session_id), "a", encoding="utf-8") as fh:
                fh.write(json.dumps(_event_to_dict(event), ensure_ascii=False) + "\n")
            session.feedback.append(event)
            if event.verdict == "sentinel":
                session.sentinel_pmids.add(event.pmid)
            return session


# --- refinement --------------------------------------------------------------

# Edits touching the context force query regeneration; edits touching only
# the generated queries re-enter at Boolean search.
_EDIT_STAGE = {
    "remove_term": "generate_queries",
    "add_term": "generate_queries",
    "block_term": "generate_queries",
    "set_profile": "generate_queries",
    "edit_query": "boolean_search",
    "remove_query": "boolean_search",
}
_STAGE_ORDER = ("generate_queries", "boolean_search")


def _copy_session(session: ReviewSession) -> ReviewSession:
    copied = session_from_dict(session_to_dict(session), feedback=list(session.feedback))
    return copied


def _norm(term: str) -> str:
    return " ".join(term.split()).casefold()


def _apply_edit(session: ReviewSession, edit: dict) -> str:
    from .context import SafetyPolicy, apply_safety_filter

    op = edit.get("op")
    if op not in _EDIT_STAGE:
        raise InputError(f"unknown edit op {op!r}")
    ctx = session.context
    if ctx is None:
        raise UnknownReferenceError("session has no context to edit")

    if op == "remove_term":
        term = _norm(str(edit.get("term", "")))
        before = len(ctx.kg_terms) + len(ctx.lm_terms)
        ctx.kg_terms = [t for t in ctx.kg_terms if _norm(t.term) != term]
        ctx.lm_terms = [t for t in ctx.lm_terms if _norm(t[0]) != term]
        if len(ctx.kg_terms) + len(ctx.lm_terms) == before:
            raise UnknownReferenceError(f"term {edit.get('term')!r} not in context")
    elif op == "add_term":
        term = str(edit.get("term", "")).strip()
        if not term:
            raise InputError("add_term requires a non-empty term")
        if all(_norm(t[0]) != _norm(term) for t in ctx.lm_terms):
            ctx.lm_terms.append((term, "librarian"))
    elif op == "block_term":
        term = str(edit.get("term", "")).strip()
        if not term:
            raise InputError("block_term requires a non-empty term")
        policy = SafetyPolicy(
            profile_id=str(edit.get("profile_id", "librarian-edit")),
            blocked_terms=frozenset({term}),
        )
        session.context = apply_safety_filter(ctx, policy)
    elif op == "set_profile":
        policy = SafetyPolicy.from_dict(edit.get("policy") or {})
        session.context = apply_safety_filter(ctx, policy)
    elif op == "edit_query":
        rank = edit.get("rank")
        text = str(edit.get("text", "")).strip()
        if not text:
            raise InputError("edit_query requires non-empty text")
        for i, q in enumerate(session.queries):
            if q.rank == rank:
                session.queries[i] = replace(q, text=text)
                break
        else:
            raise UnknownReferenceError(f"no generated query with rank {rank}")
    elif op == "remove_query":
        rank = edit.get("rank")
        kept = [q for q in session.queries if q.rank != rank]
        if len(kept) == len(session.queries):
            raise UnknownReferenceError(f"no generated query with rank {rank}")
        session.queries = [replace(q, rank=i) for i, q in enumerate(kept, start=1)]
    return _EDIT_STAGE[op]


def refine_and_rerun(
    store: SessionStore,
    session_id: str,
    edits: Sequence[dict],
    pipeline,
    expected_revision: int | None = None,
) -> ReviewSession:
    """Apply librarian edits to a copy, re-execute downstream, save rev n+1.

    The prior revision file stays untouched; an empty edit list still bumps
    the revision (an explicit no-op refinement).
    """
    base = store.load_session(session_id)
    if expected_revision is not None and expected_revision != base.revision:
        raise RevisionConflictError(session_id, expected_revision, base.revision)
    session = _copy_session(base)
    session.revision = base.revision + 1

    first_stage = None
    for edit in edits:
        stage = _apply_edit(session, edit)
        if first_stage is None or _STAGE_ORDER.index(stage) < _STAGE_ORDER.index(
            first_stage
        ):
            first_stage = stage
    if first_stage is not None:
        pipeline.rerun(session, from_stage=first_stage)
    store.save_session(session)
    return session
