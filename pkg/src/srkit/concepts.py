"""Seed-concept extraction: dictionary matching questions against MeSH.

Plain greedy longest-match keeps results deterministic and auditable;
anything a librarian sees in the expansion screen can be traced back to a
span of the original question.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import InputError
from .mesh import MeshKb, normalize_term

MAX_QUESTION_CHARS = 2000
MATCH_WINDOW_TOKENS = 6
MIN_UNRESOLVED_LEN = 4

# Word runs with hyphens kept inside tokens; underscores count as punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*", re.UNICODE)


@dataclass(frozen=True)
class ResearchQuestion:
    text: str
    language_tag: str = "en"

    def __post_init__(self):
        if not self.text.strip():
            raise InputError("question text is empty")
        if len(self.text) > MAX_QUESTION_CHARS:
            raise InputError(f"question longer than {MAX_QUESTION_CHARS} characters")


@dataclass(frozen=True)
class SeedConcept:
    surface: str
    span: tuple[int, int]
    descriptor_ui: str | None = None
    resolved_name: str | None = None

    @property
    def display_name(self) -> str:
        return self.resolved_name or self.surface


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One word per line, UTF-8. Defaults to the packaged ~180-word list."""
    if path is None:
        text = resources.files("srkit.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().casefold() for w in text.splitlines() if w.strip())


def tokenize(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Split on whitespace/punctuation, spans into the original string."""
    return [(m.group(), (m.start(), m.end())) for m in _TOKEN_RE.finditer(text)]


def extract_seeds(
    question: ResearchQuestion,
    kb: MeshKb,
    stopwords: frozenset[str] | None = None,
) -> list[SeedConcept]:
    """Greedy longest-match of the token stream against KB names/entry terms.

    Windows of up to six tokens are tried longest-first at each position, so
    matched spans never overlap. Single-token matches that are stopwords are
    dropped; unmatched content tokens (non-stopword, >= 4 chars) come back as
    unresolved seeds so the review screen can show what failed to resolve.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    tokens = tokenize(question.text)
    seeds: list[SeedConcept] = []
    i = 0
    while i < len(tokens):
        matched = False
        for width in range(min(MATCH_WINDOW_TOKENS, len(tokens) - i), 0, -1):
            start = tokens[i][1][0]
            end = tokens[i + width - 1][1][1]
            # Match on the raw slice so lookup(surface) reproduces the hit.
            candidate = question.text[start:end]
            if width == 1 and normalize_term(candidate) in stopwords:
                continue
            descriptor = kb.lookup(candidate)
            if descriptor is not None:
                seeds.append(
                    SeedConcept(
                        surface=candidate,
                        span=(start, end),
                        descriptor_ui=descriptor.ui,
                        resolved_name=descriptor.name,
                    )
                )
                i += width
                matched = True
                break
        if matched:
            continue
        tok, span = tokens[i]
        if tok.casefold() not in stopwords and len(tok) >= MIN_UNRESOLVED_LEN:
            seeds.append(SeedConcept(surface=tok, span=span))
        i += 1
    return seeds
