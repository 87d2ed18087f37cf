"""Passage chunking, embedding, exact cosine search, and rank fusion.

Search is exhaustive on purpose: at the corpus sizes this pipeline handles
(tens of thousands of passages at most) exact scoring is cheap, and it makes
the retrieval layer directly checkable against a brute-force oracle.
"""

from __future__ import annotations

import hashlib
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .concepts import load_stopwords
from .errors import (
    DimensionError,
    DuplicatePassageError,
    EmptyIndexError,
    InputError,
    TransportError,
)
from .pubmed import ArticleRecord
from .queries import GeneratedQuery

DEFAULT_DIM = 256
DEFAULT_MAX_WORDS = 120
DEFAULT_OVERLAP_WORDS = 20
RRF_CONSTANT = 60

SNAPSHOT_MAGIC = b"SRIX1"

_WORD_RE = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*")


@dataclass(frozen=True)
class Passage:
    article_pmid: str
    chunk_index: int
    text: str

    def __post_init__(self):
        if not self.text:
            raise InputError("passage text must be non-empty")
        if self.chunk_index < 0:
            raise InputError("chunk_index must be >= 0")

    @property
    def passage_id(self) -> str:
        return f"{self.article_pmid}#{self.chunk_index}"


@dataclass(frozen=True)
class RankedHit:
    passage_id: str
    score: float
    rank: int


def pmid_of(passage_id: str) -> str:
    return passage_id.split("#", 1)[0]


def chunk(
    article: ArticleRecord,
    max_words: int = DEFAULT_MAX_WORDS,
    overlap_words: int = DEFAULT_OVERLAP_WORDS,
) -> list[Passage]:
    """Title passage first, then sliding word windows over the abstract."""
    if max_words < 20:
        raise InputError("max_words must be >= 20")
    if not 0 <= overlap_words < max_words:
        raise InputError("overlap_words must be in [0, max_words)")
    passages = [Passage(article.pmid, 0, article.title or "(untitled)")]
    words = article.abstract.split()
    step = max_words - overlap_words
    start = 0
    while start < len(words):
        window = words[start : start + max_words]
        passages.append(Passage(article.pmid, len(passages), " ".join(window)))
        if start + max_words >= len(words):
            break
        start += step
    return passages


class HashedEmbedder:
    """Offline signed hashed bag-of-words, L2-normalized, bitwise stable.

    Token hashing uses blake2b so vectors do not depend on the process hash
    seed; all-stopword or empty text maps to the reserved zero vector.
    """

    def __init__(self, dim: int = DEFAULT_DIM, stopwords: frozenset[str] | None = None):
        if dim < 2:
            raise InputError("dim must be >= 2")
        self.dim = dim
        self.stopwords = load_stopwords() if stopwords is None else stopwords
        self._cache: dict[str, tuple[int, float]] = {}

    def _bucket(self, token: str) -> tuple[int, float]:
        slot = self._cache.get(token)
        if slot is None:
            h = int.from_bytes(
                hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little"
            )
            # low bits pick the bucket, a high bit picks the sign
            slot = (h % self.dim, 1.0 if (h >> 60) & 1 else -1.0)
            self._cache[token] = slot
        return slot

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _WORD_RE.findall(text.casefold()):
            if token in self.stopwords:
                continue
            bucket, sign = self._bucket(token)
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec.astype(np.float32)


class ApiEmbedder:
    """Optional live embedding endpoint; responses are L2-normalized."""

    def __init__(
        self,
        endpoint_url: str,
        model_id: str,
        dim: int = DEFAULT_DIM,
        api_key_env: str = "EMBED_API_KEY",
        session: requests.Session | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint_url = endpoint_url
        self.model_id = model_id
        self.dim = dim
        self.api_key = os.environ.get(api_key_env, "")
        self.session = session or requests.Session()
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            return np.zeros(self.dim, dtype=np.float32)
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self.session.post(
                self.endpoint_url,
                json={"model": self.model_id, "input": text},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            values = response.json()["data"][0]["embedding"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as e:
            raise TransportError(f"embedding call failed: {e}") from e
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionError(f"endpoint returned dim {vec.shape}, expected {self.dim}")
        norm = np.linalg.norm(vec)
        return (vec / norm if norm > 0 else vec).astype(np.float32)


class VectorIndex:
    """Exact cosine top-k over unit vectors; single writer, many readers."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self.passage_ids: list[str] = []
        self._id_set: set[str] = set()
        self._vectors: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.passage_ids)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._id_set

    def add(self, passage_id: str, vector: np.ndarray) -> None:
        if passage_id in self._id_set:
            raise DuplicatePassageError(f"passage {passage_id!r} already indexed")
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dim,):
            raise DimensionError(
                f"vector has shape {vector.shape}, index dim is {self.dim}"
            )
        self.passage_ids.append(passage_id)
        self._id_set.add(passage_id)
        self._vectors.append(vector)
        self._matrix = None

    def add_passage(self, passage: Passage, vector: np.ndarray) -> None:
        self.add(passage.passage_id, vector)

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (
                np.vstack(self._vectors)
                if self._vectors
                else np.empty((0, self.dim), dtype=np.float32)
            )
        return self._matrix

    def search(self, query_vector: np.ndarray, k: int) -> list[RankedHit]:
        """Top-min(k, size) by cosine score; ties break by ascending id."""
        if k < 1:
            raise InputError("k must be >= 1")
        if not self.passage_ids:
            raise EmptyIndexError("index is empty")
        query = np.asarray(query_vector, dtype=np.float64)
        if query.shape != (self.dim,):
            raise DimensionError(
                f"query has shape {query.shape}, index dim is {self.dim}"
            )
        # f32 storage can push a self-match epsilon past 1; clip to the
        # declared cosine range.
        scores = np.clip(self.matrix().astype(np.float64) @ query, -1.0, 1.0)
        order = sorted(
            range(len(scores)), key=lambda i: (-scores[i], self.passage_ids[i])
        )[: min(k, len(scores))]
        return [
            RankedHit(self.passage_ids[i], float(scores[i]), rank)
            for rank, i in enumerate(order, start=1)
        ]

    def save(self, path: str | Path) -> None:
        """Snapshot: magic, dim (u32 LE), length-prefixed id + f32 records."""
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<I", self.dim))
            for pid, vec in zip(self.passage_ids, self._vectors):
                encoded = pid.encode("utf-8")
                fh.write(struct.pack("<I", len(encoded)))
                fh.write(encoded)
                fh.write(vec.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        with open(path, "rb") as fh:
            magic = fh.read(len(SNAPSHOT_MAGIC))
            if magic != SNAPSHOT_MAGIC:
                raise InputError(f"bad snapshot magic {magic!r}")
            dim = struct.unpack("<I", fh.read(4))[0]
            index = cls(dim=dim)
            while True:
                header = fh.read(4)
                if not header:
                    break
                (id_len,) = struct.unpack("<I", header)
                pid = fh.read(id_len).decode("utf-8")
                vec = np.frombuffer(fh.read(4 * dim), dtype="<f4")
                index.add(pid, vec)
        return index


def fuse(
    per_query_hits: Sequence[tuple[GeneratedQuery, Sequence[RankedHit]]],
    k: int,
) -> list[tuple[str, float]]:
    """Reciprocal rank fusion of per-query passage rankings, by article.

    Passages collapse to their article at the best (smallest) rank per list;
    each list then contributes 1/(60 + rank). Ties break by ascending pmid.
    """
    if not per_query_hits:
        raise InputError("need at least one query hit list")
    scores: dict[str, float] = {}
    for _, hits in per_query_hits:
        best_rank: dict[str, int] = {}
        for hit in hits:
            pmid = pmid_of(hit.passage_id)
            if pmid not in best_rank or hit.rank < best_rank[pmid]:
                best_rank[pmid] = hit.rank
        for pmid, rank in best_rank.items():
            scores[pmid] = scores.get(pmid, 0.0) + 1.0 / (RRF_CONSTANT + rank)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[: max(k, 0)]
