"""Four-stage review pipeline: seeds -> context -> queries -> retrieval.

Configuration is a flat key=value file with environment overrides
(``SRKIT_<KEY>``); secrets only ever come from the environment. With replay
cassettes, a fixture corpus, and the offline embedder the whole run is
deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

from . import concepts, context as ctx_mod, queries as q_mod, retrieval
from .concepts import ResearchQuestion
from .context import DEFAULT_RELATION_VOCAB, SafetyPolicy
from .errors import ConfigError, EmptyContextError, SrkitError, StageError
from .llm import Cassette, LiveProvider, MockProvider, RecordProvider, ReplayProvider
from .mesh import ExpansionPolicy, MeshKb, ingest_descriptors
from .pubmed import EntrezClient, FixtureClient, build_boolean_query, render
from .retrieval import HashedEmbedder, VectorIndex, chunk, fuse
from .sessions import ReviewSession, SessionStore, new_session_id

STAGES = (
    "extract_seeds",
    "expand_context",
    "generate_queries",
    "boolean_search",
    "fetch_articles",
    "index_passages",
    "rank_passages",
    "fuse_rankings",
    "save_session",
)

ENV_PREFIX = "SRKIT_"


@dataclass
class PipelineConfig:
    kb_source: str = ""
    provider: str = "mock"  # live | mock | replay | record
    cassette_path: str = ""
    llm_endpoint: str = ""
    model_id: str = "offline-fixture"
    pubmed_mode: str = "fixture"  # live | fixture
    corpus_path: str = ""
    policy_path: str = ""
    stopwords_path: str = ""
    sessions_dir: str = "sessions"
    n_queries: int = 5
    retrieval_k: int = 10
    retmax: int = 50
    per_seed_cap: int = 3
    per_query_k: int = 50
    max_hits: int = 100
    chunk_max_words: int = 120
    chunk_overlap_words: int = 20
    embedder: str = "offline"  # offline | live
    embed_dim: int = 256
    embed_endpoint: str = ""
    embed_model: str = ""
    lm_max_terms: int = 10
    relation_vocab: tuple[str, ...] = DEFAULT_RELATION_VOCAB
    expansion: ExpansionPolicy = field(default_factory=ExpansionPolicy)

    _INT_KEYS = {
        "n_queries",
        "retrieval_k",
        "retmax",
        "per_seed_cap",
        "per_query_k",
        "max_hits",
        "chunk_max_words",
        "chunk_overlap_words",
        "embed_dim",
        "lm_max_terms",
    }

    @classmethod
    def from_file(cls, path: str | Path, env: dict | None = None) -> "PipelineConfig":
        """Parse key=value lines (# comments) relative to the file's parent."""
        env = os.environ if env is None else env
        base = Path(path).parent
        values: dict[str, object] = {}
        try:
            lines = Path(path).read_text("utf-8").splitlines()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        config = cls._from_values(values, env, base)
        config.validate()
        return config

    @classmethod
    def _from_values(cls, values: dict, env, base: Path) -> "PipelineConfig":
        known = {f.name for f in dataclass_fields(cls) if not f.name.startswith("_")}
        config = cls()
        # sessions_dir is runtime output and resolves against the working
        # directory; everything else is fixture input relative to the config.
        path_keys = {
            "kb_source",
            "cassette_path",
            "corpus_path",
            "policy_path",
            "stopwords_path",
        }
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, value)
        for key in known:
            override = env.get(ENV_PREFIX + key.upper())
            if override is not None:
                setattr(config, key, override)
        for key in cls._INT_KEYS:
            value = getattr(config, key)
            if isinstance(value, str):
                try:
                    setattr(config, key, int(value))
                except ValueError as e:
                    raise ConfigError(f"config key {key} must be an integer") from e
        if isinstance(config.relation_vocab, str):
            config.relation_vocab = tuple(
                s.strip() for s in config.relation_vocab.split(",") if s.strip()
            )
        for key in path_keys:
            value = getattr(config, key)
            if value and not os.path.isabs(value):
                setattr(config, key, str(base / value))
        return config

    def validate(self) -> None:
        if self.provider not in ("live", "mock", "replay", "record"):
            raise ConfigError(f"unknown provider {self.provider!r}")
        if self.pubmed_mode not in ("live", "fixture"):
            raise ConfigError(f"unknown pubmed_mode {self.pubmed_mode!r}")
        if self.embedder not in ("offline", "live"):
            raise ConfigError(f"unknown embedder {self.embedder!r}")
        if not self.kb_source:
            raise ConfigError("kb_source is required")
        if not Path(self.kb_source).exists():
            raise ConfigError(f"kb_source does not exist: {self.kb_source}")
        if self.provider == "replay":
            if not self.cassette_path or not Path(self.cassette_path).exists():
                raise ConfigError("replay provider requires an existing cassette_path")
        if self.provider in ("live", "record") and not self.llm_endpoint:
            raise ConfigError(f"{self.provider} provider requires llm_endpoint")
        if self.pubmed_mode == "fixture":
            if not self.corpus_path or not Path(self.corpus_path).exists():
                raise ConfigError("fixture pubmed_mode requires an existing corpus_path")
        if self.policy_path and not Path(self.policy_path).exists():
            raise ConfigError(f"policy_path does not exist: {self.policy_path}")
        if self.embedder == "live" and not self.embed_endpoint:
            raise ConfigError("live embedder requires embed_endpoint")


class Pipeline:
    """Holds the wired components and executes/refines review sessions."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.kb: MeshKb = ingest_descriptors(config.kb_source)
        self.stopwords = concepts.load_stopwords(config.stopwords_path or None)
        self.policy = (
            SafetyPolicy.load(config.policy_path) if config.policy_path else SafetyPolicy()
        )
        self.gateway = self._build_gateway(config)
        self.pubmed = self._build_pubmed(config)
        self.embedder = self._build_embedder(config)
        self.store = SessionStore(config.sessions_dir)

    @staticmethod
    def _build_gateway(config: PipelineConfig):
        if config.provider == "mock":
            return MockProvider()
        if config.provider == "replay":
            return ReplayProvider(Cassette.load(config.cassette_path))
        live = LiveProvider(config.llm_endpoint, config.model_id)
        if config.provider == "record":
            return RecordProvider(live, config.cassette_path)
        return live

    @staticmethod
    def _build_pubmed(config: PipelineConfig):
        if config.pubmed_mode == "fixture":
            return FixtureClient.from_file(config.corpus_path)
        return EntrezClient()

    @staticmethod
    def _build_embedder(config: PipelineConfig):
        if config.embedder == "live":
            return retrieval.ApiEmbedder(
                config.embed_endpoint, config.embed_model, dim=config.embed_dim
            )
        return HashedEmbedder(dim=config.embed_dim)

    def run(self, question: ResearchQuestion | str, session_id: str | None = None) -> ReviewSession:
        """Execute all stages; on failure, persist a partial session marked
        with the failing stage and re-raise as StageError."""
        if isinstance(question, str):
            question = ResearchQuestion(question)
        session = ReviewSession(
            session_id=session_id or new_session_id(), question=question
        )
        try:
            self._execute(session, from_stage="extract_seeds")
        except StageError as e:
            session.failure = {"stage": e.stage, "message": str(e.cause)}
            try:
                self.store.save_session(session)
            except SrkitError:
                pass
            raise
        with _stage("save_session"):
            self.store.save_session(session)
        return session

    def rerun(self, session: ReviewSession, from_stage: str) -> ReviewSession:
        """Re-execute stages >= from_stage on a working copy (no save)."""
        self._execute(session, from_stage=from_stage)
        return session

    def _execute(self, session: ReviewSession, from_stage: str) -> None:
        if from_stage not in STAGES:
            raise ConfigError(f"unknown stage {from_stage!r}")
        start = STAGES.index(from_stage)
        seeds = None

        if start <= STAGES.index("extract_seeds"):
            with _stage("extract_seeds"):
                seeds = concepts.extract_seeds(session.question, self.kb, self.stopwords)
                if not seeds:
                    raise EmptyContextError(
                        "question yields no seed concepts (all stopwords?)"
                    )
        if start <= STAGES.index("expand_context"):
            with _stage("expand_context"):
                session.context = ctx_mod.expand_context(
                    seeds if seeds is not None else session.context.seeds,
                    self.kb,
                    self.gateway,
                    relation_vocab=self.config.relation_vocab,
                    policy=self.policy,
                    expansion_policy=self.config.expansion,
                    lm_max_terms=self.config.lm_max_terms,
                    model_id=self.config.model_id,
                )
        if start <= STAGES.index("generate_queries"):
            with _stage("generate_queries"):
                session.queries = q_mod.generate_queries(
                    session.context,
                    self.gateway,
                    n=self.config.n_queries,
                    model_id=self.config.model_id,
                )
        # Retrieval stages sit downstream of every refine entry point and
        # always re-execute; in fixture mode they are pure and cheap.
        with _stage("boolean_search"):
            tree = build_boolean_query(session.context, self.config.per_seed_cap)
            session.boolean_query = render(tree)
            pmids = self.pubmed.esearch(tree, retmax=self.config.retmax)
        with _stage("fetch_articles"):
            articles = []
            if pmids:
                articles, _unknown = self.pubmed.efetch(pmids)
        with _stage("index_passages"):
            index = VectorIndex(dim=self.config.embed_dim)
            for article in articles:
                for passage in chunk(
                    article,
                    self.config.chunk_max_words,
                    self.config.chunk_overlap_words,
                ):
                    index.add(passage.passage_id, self.embedder.embed(passage.text))
        with _stage("rank_passages"):
            per_query = []
            if len(index):
                for query in session.queries:
                    hits = index.search(
                        self.embedder.embed(query.text), self.config.per_query_k
                    )
                    per_query.append((query, hits))
        with _stage("fuse_rankings"):
            session.hits = fuse(per_query, self.config.max_hits) if per_query else []


class _stage:
    """Wraps stage failures as StageError carrying the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_pipeline(config: PipelineConfig, question: ResearchQuestion | str) -> ReviewSession:
    return Pipeline(config).run(question)
