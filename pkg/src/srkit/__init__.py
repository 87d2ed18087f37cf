"""srkit: systematic-review search assistant.

Pipeline: extract seed concepts from a research question, enrich them with
MeSH knowledge-graph context and LM suggestions, generate related queries,
retrieve PubMed articles, rank passages with an exact cosine retriever, fuse
per-query rankings, and score the result against librarian sentinel articles.
"""

from .concepts import ResearchQuestion, SeedConcept, extract_seeds, load_stopwords, tokenize
from .context import (
    DEFAULT_RELATION_VOCAB,
    ExpandedContext,
    KgTerm,
    RelationEdge,
    SafetyPolicy,
    apply_safety_filter,
    expand_context,
    suggest_lm_terms,
)
from .llm import (
    Cassette,
    ChatRequest,
    ChatResponse,
    LiveProvider,
    MockProvider,
    RateLimiter,
    RecordProvider,
    ReplayProvider,
    complete,
    fingerprint,
)
from .mesh import (
    ExpansionPolicy,
    ExpansionSet,
    MeshDescriptor,
    MeshKb,
    ingest_descriptors,
)
from .pipeline import Pipeline, PipelineConfig, run_pipeline
from .pubmed import (
    And,
    ArticleRecord,
    BooleanQuery,
    EntrezClient,
    FixtureClient,
    Not,
    Or,
    Term,
    build_boolean_query,
    load_corpus,
    parse_query,
    render,
)
from .queries import GeneratedQuery, build_prompt, fallback_generate, generate_queries
from .retrieval import (
    HashedEmbedder,
    Passage,
    RankedHit,
    VectorIndex,
    chunk,
    fuse,
)
from .sessions import (
    FeedbackEvent,
    Metrics,
    ReviewSession,
    SessionStore,
    evaluate,
    refine_and_rerun,
)

__version__ = "0.1.0"

__all__ = [
    "And",
    "ArticleRecord",
    "BooleanQuery",
    "Cassette",
    "ChatRequest",
    "ChatResponse",
    "DEFAULT_RELATION_VOCAB",
    "EntrezClient",
    "ExpandedContext",
    "ExpansionPolicy",
    "ExpansionSet",
    "FeedbackEvent",
    "FixtureClient",
    "GeneratedQuery",
    "HashedEmbedder",
    "KgTerm",
    "LiveProvider",
    "MeshDescriptor",
    "MeshKb",
    "Metrics",
    "MockProvider",
    "Not",
    "Or",
    "Passage",
    "Pipeline",
    "PipelineConfig",
    "RankedHit",
    "RateLimiter",
    "RecordProvider",
    "RelationEdge",
    "ReplayProvider",
    "ResearchQuestion",
    "ReviewSession",
    "SafetyPolicy",
    "SeedConcept",
    "SessionStore",
    "Term",
    "VectorIndex",
    "apply_safety_filter",
    "build_boolean_query",
    "build_prompt",
    "chunk",
    "complete",
    "evaluate",
    "expand_context",
    "extract_seeds",
    "fallback_generate",
    "fingerprint",
    "fuse",
    "generate_queries",
    "ingest_descriptors",
    "load_corpus",
    "load_stopwords",
    "parse_query",
    "refine_and_rerun",
    "render",
    "run_pipeline",
    "suggest_lm_terms",
    "tokenize",
]
