"""PubMed Boolean queries and article retrieval (E-utilities or fixtures).

The query AST renders to PubMed syntax and parses back; the fixture client
evaluates the same trees over a local JSONL corpus with a deliberately
simpler matcher than PubMed's (plain case-insensitive containment, no
automatic term mapping).
"""

from __future__ import annotations

import json
import os
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import requests

from .context import ExpandedContext
from .errors import (
    InputError,
    QueryStructureError,
    QuerySyntaxError,
    RecordParseError,
    RemoteError,
    TransportError,
)
from .llm import RateLimiter, retry_with_backoff

ESEARCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi"
EFETCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi"

FIELD_TAGS = ("MeSH Terms", "tiab", "All Fields")
MAX_TREE_DEPTH = 10
EFETCH_BATCH = 200
MAX_RETMAX = 10000


# --- query AST ---------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    text: str
    field_tag: str = "All Fields"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    left: object
    right: object


BooleanQuery = Term | And | Or | Not


def validate(query: BooleanQuery, _depth: int = 1) -> None:
    """Raise QueryStructureError on invariant violations."""
    if _depth > MAX_TREE_DEPTH:
        raise QueryStructureError(f"tree deeper than {MAX_TREE_DEPTH}")
    if isinstance(query, Term):
        if not query.text.strip():
            raise QueryStructureError("term text is empty")
        if query.field_tag not in FIELD_TAGS:
            raise QueryStructureError(f"unknown field tag {query.field_tag!r}")
    elif isinstance(query, (And, Or)):
        if len(query.children) < 2:
            raise QueryStructureError(
                f"{type(query).__name__} needs >= 2 children, got {len(query.children)}"
            )
        for child in query.children:
            validate(child, _depth + 1)
    elif isinstance(query, Not):
        validate(query.left, _depth + 1)
        validate(query.right, _depth + 1)
    else:
        raise QueryStructureError(f"not a query node: {query!r}")


def render(query: BooleanQuery) -> str:
    """PubMed syntax: quoted terms with [tag], parenthesized OR-groups."""
    validate(query)
    return _render(query)


def _render(node: BooleanQuery) -> str:
    if isinstance(node, Term):
        return f'"{node.text.replace(chr(34), "")}"[{node.field_tag}]'
    if isinstance(node, Or):
        return "(" + " OR ".join(_render(c) for c in node.children) + ")"
    if isinstance(node, And):
        return " AND ".join(_wrap(c) for c in node.children)
    if isinstance(node, Not):
        left = _render(node.left) if isinstance(node.left, (Term, Not, Or)) else _wrap(node.left)
        right = _render(node.right) if isinstance(node.right, (Term, Or)) else _wrap(node.right)
        return f"{left} NOT {right}"
    raise QueryStructureError(f"not a query node: {node!r}")


def _wrap(node: BooleanQuery) -> str:
    rendered = _render(node)
    if isinstance(node, Or):
        return rendered  # already self-parenthesized
    return f"({rendered})"


class _Parser:
    """Recursive descent over the render grammar.

    OR is loosest, AND binds tighter, NOT (infix, left-associative) binds
    tighter still; parentheses group.
    """

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def parse(self) -> BooleanQuery:
        node = self.parse_or()
        self.skip_ws()
        if self.pos != len(self.text):
            raise QuerySyntaxError("trailing input", self.pos)
        return node

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def keyword(self, word: str) -> bool:
        self.skip_ws()
        end = self.pos + len(word)
        if self.text[self.pos : end] == word and (
            end == len(self.text) or not self.text[end].isalnum()
        ):
            self.pos = end
            return True
        return False

    def parse_or(self) -> BooleanQuery:
        children = [self.parse_and()]
        while self.keyword("OR"):
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> BooleanQuery:
        children = [self.parse_not()]
        while self.keyword("AND"):
            children.append(self.parse_not())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_not(self) -> BooleanQuery:
        node = self.parse_atom()
        while self.keyword("NOT"):
            node = Not(node, self.parse_atom())
        return node

    def parse_atom(self) -> BooleanQuery:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise QuerySyntaxError("unexpected end of query", self.pos)
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            node = self.parse_or()
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] != ")":
                raise QuerySyntaxError("expected ')'", self.pos)
            self.pos += 1
            return node
        if ch == '"':
            return self.parse_term()
        raise QuerySyntaxError(f"expected term or '(', found {ch!r}", self.pos)

    def parse_term(self) -> Term:
        start = self.pos
        self.pos += 1  # opening quote
        end = self.text.find('"', self.pos)
        if end == -1:
            raise QuerySyntaxError("unterminated quoted term", start)
        text = self.text[self.pos : end]
        if not text.strip():
            raise QuerySyntaxError("empty term", start)
        self.pos = end + 1
        tag = "All Fields"
        if self.pos < len(self.text) and self.text[self.pos] == "[":
            close = self.text.find("]", self.pos)
            if close == -1:
                raise QuerySyntaxError("unterminated field tag", self.pos)
            tag = self.text[self.pos + 1 : close]
            if tag not in FIELD_TAGS:
                raise QuerySyntaxError(f"unknown field tag {tag!r}", self.pos)
            self.pos = close + 1
        return Term(text, tag)


def parse_query(text: str) -> BooleanQuery:
    if not text.strip():
        raise InputError("query text is empty")
    return _Parser(text).parse()


def build_boolean_query(context: ExpandedContext, per_seed_cap: int = 3) -> BooleanQuery:
    """AND of per-seed OR-groups in standard librarian block-search style.

    Resolved seeds get their name under both [MeSH Terms] and [tiab] plus up
    to ``per_seed_cap`` of their expansion terms as [tiab]; unresolved seeds
    contribute a bare [tiab] term.
    """
    if not context.seeds:
        raise InputError("context has no seeds")
    groups: list[BooleanQuery] = []
    for seed in context.seeds:
        name = seed.display_name
        if seed.descriptor_ui is None:
            groups.append(Term(name, "tiab"))
            continue
        children: list[BooleanQuery] = [Term(name, "MeSH Terms"), Term(name, "tiab")]
        seen = {name.casefold()}
        taken = 0
        for kg in context.kg_terms:
            if taken >= per_seed_cap:
                break
            if kg.seed_ui != seed.descriptor_ui or kg.provenance == "self":
                continue
            if kg.term.casefold() in seen:
                continue
            seen.add(kg.term.casefold())
            children.append(Term(kg.term, "tiab"))
            taken += 1
        groups.append(Or(tuple(children)))
    return groups[0] if len(groups) == 1 else And(tuple(groups))


# --- article records ---------------------------------------------------------


@dataclass(frozen=True)
class ArticleRecord:
    pmid: str
    title: str
    abstract: str = ""
    mesh_headings: tuple[str, ...] = ()
    pub_year: int | None = None
    journal: str = ""

    def __post_init__(self):
        if not self.pmid or not self.pmid.isdigit():
            raise InputError(f"pmid must be non-empty digits, got {self.pmid!r}")

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "title": self.title,
            "abstract": self.abstract,
            "mesh_headings": list(self.mesh_headings),
            "pub_year": self.pub_year,
            "journal": self.journal,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ArticleRecord":
        return cls(
            pmid=str(obj["pmid"]),
            title=obj.get("title", ""),
            abstract=obj.get("abstract", "") or "",
            mesh_headings=tuple(obj.get("mesh_headings", [])),
            pub_year=obj.get("pub_year"),
            journal=obj.get("journal", "") or "",
        )


def load_corpus(path: str | Path) -> list[ArticleRecord]:
    """Fixture corpus: JSON Lines, one article per line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(ArticleRecord.from_dict(json.loads(line)))
    return records


# --- clients -----------------------------------------------------------------


class FixtureClient:
    """Evaluates Boolean trees over a local corpus; pure and offline.

    Matching is case-insensitive containment: [tiab] looks in title and
    abstract, [MeSH Terms] in the heading list, [All Fields] in everything.
    """

    def __init__(self, corpus: Sequence[ArticleRecord]):
        self.corpus = list(corpus)
        seen: set[str] = set()
        for a in self.corpus:
            if a.pmid in seen:
                raise InputError(f"duplicate pmid in corpus: {a.pmid}")
            seen.add(a.pmid)
        self._by_pmid = {a.pmid: a for a in self.corpus}

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureClient":
        return cls(load_corpus(path))

    def _matches(self, term: Term, article: ArticleRecord) -> bool:
        needle = term.text.casefold()
        tiab = f"{article.title}\n{article.abstract}".casefold()
        mesh = any(needle in h.casefold() for h in article.mesh_headings)
        if term.field_tag == "tiab":
            return needle in tiab
        if term.field_tag == "MeSH Terms":
            return mesh
        return needle in tiab or mesh or needle in article.journal.casefold()

    def _evaluate(self, node: BooleanQuery) -> set[str]:
        if isinstance(node, Term):
            return {a.pmid for a in self.corpus if self._matches(node, a)}
        if isinstance(node, And):
            result = self._evaluate(node.children[0])
            for child in node.children[1:]:
                result &= self._evaluate(child)
            return result
        if isinstance(node, Or):
            result: set[str] = set()
            for child in node.children:
                result |= self._evaluate(child)
            return result
        if isinstance(node, Not):
            return self._evaluate(node.left) - self._evaluate(node.right)
        raise QueryStructureError(f"not a query node: {node!r}")

    def esearch(self, query: BooleanQuery, retmax: int = 50) -> list[str]:
        if not 1 <= retmax <= MAX_RETMAX:
            raise InputError(f"retmax must be in [1, {MAX_RETMAX}]")
        validate(query)
        hits = self._evaluate(query)
        return [a.pmid for a in self.corpus if a.pmid in hits][:retmax]

    def efetch(self, pmids: Sequence[str]) -> tuple[list[ArticleRecord], list[str]]:
        if not pmids:
            raise InputError("pmids must be non-empty")
        records, unknown = [], []
        for pmid in dict.fromkeys(pmids):
            article = self._by_pmid.get(pmid)
            if article is None:
                unknown.append(pmid)
            else:
                records.append(article)
        return records, unknown


class EntrezClient:
    """Live E-utilities client with rate limiting and retries.

    NCBI allows 3 requests/s anonymously and 10/s with an API key; the key
    is taken from the environment, never from configuration files.
    """

    def __init__(
        self,
        api_key_env: str = "PUBMED_API_KEY",
        tool: str = "srkit",
        email: str = "",
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        esearch_url: str = ESEARCH_URL,
        efetch_url: str = EFETCH_URL,
        rate_limiter: RateLimiter | None = None,
    ):
        self.api_key = os.environ.get(api_key_env, "")
        self.tool = tool
        self.email = email
        self.session = session or requests.Session()
        self._sleep = sleep
        self.esearch_url = esearch_url
        self.efetch_url = efetch_url
        self.limiter = rate_limiter or RateLimiter(10.0 if self.api_key else 3.0)
        self.request_log: list[float] = []

    def _get(self, url: str, params: dict) -> requests.Response:
        base = dict(params)
        base["tool"] = self.tool
        if self.email:
            base["email"] = self.email
        if self.api_key:
            base["api_key"] = self.api_key

        def call():
            self.limiter.acquire()
            self.request_log.append(time.monotonic())
            return self.session.get(url, params=base, timeout=30)

        try:
            response = retry_with_backoff(call, sleep=self._sleep)
        except Exception as e:
            raise TransportError(str(e)) from e
        return response

    def esearch(self, query: BooleanQuery, retmax: int = 50) -> list[str]:
        if not 1 <= retmax <= MAX_RETMAX:
            raise InputError(f"retmax must be in [1, {MAX_RETMAX}]")
        response = self._get(
            self.esearch_url,
            {"db": "pubmed", "term": render(query), "retmax": retmax, "retmode": "json"},
        )
        try:
            body = response.json()
        except ValueError as e:
            raise RemoteError(f"esearch returned non-JSON: {e}") from e
        if "esearchresult" not in body:
            raise RemoteError(f"esearch error payload: {body}")
        result = body["esearchresult"]
        if "ERROR" in result:
            raise RemoteError(result["ERROR"])
        return list(result.get("idlist", []))[:retmax]

    def efetch(self, pmids: Sequence[str]) -> tuple[list[ArticleRecord], list[str]]:
        if not pmids:
            raise InputError("pmids must be non-empty")
        unique = list(dict.fromkeys(pmids))
        fetched: dict[str, ArticleRecord] = {}
        for i in range(0, len(unique), EFETCH_BATCH):
            batch = unique[i : i + EFETCH_BATCH]
            response = self._get(
                self.efetch_url,
                {"db": "pubmed", "id": ",".join(batch), "retmode": "xml"},
            )
            for article in parse_pubmed_xml(response.text):
                fetched[article.pmid] = article
        records = [fetched[p] for p in unique if p in fetched]
        unknown = [p for p in unique if p not in fetched]
        return records, unknown


def parse_pubmed_xml(xml_text: str) -> list[ArticleRecord]:
    """Parse a PubmedArticleSet document into ArticleRecords."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        raise RecordParseError(f"unparseable efetch XML: {e}") from e
    articles = []
    for elem in root.iter("PubmedArticle"):
        pmid = (elem.findtext(".//PMID") or "").strip()
        try:
            articles.append(_article_from_element(elem, pmid))
        except RecordParseError:
            raise
        except Exception as e:
            raise RecordParseError(f"bad article block: {e}", pmid=pmid or None) from e
    return articles


def _article_from_element(elem: ET.Element, pmid: str) -> ArticleRecord:
    if not pmid:
        raise RecordParseError("article block without PMID")
    title_el = elem.find(".//ArticleTitle")
    title = "".join(title_el.itertext()).strip() if title_el is not None else ""
    abstract = " ".join(
        "".join(a.itertext()).strip() for a in elem.findall(".//Abstract/AbstractText")
    ).strip()
    headings = tuple(
        h.text.strip()
        for h in elem.findall(".//MeshHeadingList/MeshHeading/DescriptorName")
        if h.text and h.text.strip()
    )
    year_text = elem.findtext(".//JournalIssue/PubDate/Year") or elem.findtext(
        ".//PubDate/Year"
    )
    journal = (elem.findtext(".//Journal/Title") or "").strip()
    return ArticleRecord(
        pmid=pmid,
        title=title,
        abstract=abstract,
        mesh_headings=headings,
        pub_year=int(year_text) if year_text and year_text.strip().isdigit() else None,
        journal=journal,
    )
