"""In-memory MeSH knowledge base: ingestion, hierarchy walks, term expansion.

Descriptors come either from the standard NLM ``DescriptorRecordSet`` XML or
from a small TSV fixture format (one descriptor per line,
``ui \\t name \\t tree1;tree2 \\t scope note \\t entry1|entry2``). Tree numbers
encode the poly-hierarchy: a descriptor is broader than another when one of
its tree numbers is a strict dot-prefix of one of the other's.
"""

from __future__ import annotations

import bisect
import io
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import DuplicateDescriptorError, IngestError, InputError, NotFoundError

UI_RE = re.compile(r"^D\d{6}(?:\d{3})?$")
TREE_NUMBER_RE = re.compile(r"^[A-Z][0-9]{2}(?:\.[0-9]{3})*$")

# Deeper than any tree number in a real MeSH release.
MAX_TREE_DEPTH = 15


def normalize_term(term: str) -> str:
    """Case-fold and collapse internal whitespace. No stemming."""
    return " ".join(term.split()).casefold()


@dataclass(frozen=True)
class MeshDescriptor:
    ui: str
    name: str
    tree_numbers: tuple[str, ...] = ()
    scope_note: str = ""
    entry_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if not UI_RE.match(self.ui):
            raise InputError(f"descriptor UI {self.ui!r} does not match D + 6/9 digits")
        if not self.name.strip():
            raise InputError("descriptor name must be non-empty")
        for tn in self.tree_numbers:
            if not TREE_NUMBER_RE.match(tn):
                raise InputError(f"bad tree number {tn!r} on {self.ui}")


@dataclass(frozen=True)
class ExpansionPolicy:
    include_broader: bool = False
    include_narrower: bool = True
    narrower_depth: int = 1
    include_entry_terms: bool = True
    max_terms: int = 25

    def __post_init__(self):
        if self.narrower_depth < 0 or self.narrower_depth > MAX_TREE_DEPTH:
            raise InputError(f"narrower_depth must be in [0, {MAX_TREE_DEPTH}]")
        if self.max_terms < 1:
            raise InputError("max_terms must be >= 1")


@dataclass(frozen=True)
class ExpandedTerm:
    term: str
    provenance: str  # self | entry_term | broader | narrower
    ui: str


@dataclass(frozen=True)
class ExpansionSet:
    seed_ui: str
    seed_name: str
    definition: str
    terms: tuple[ExpandedTerm, ...]


class MeshKb:
    """Immutable after ingestion; all queries are read-only."""

    def __init__(self, descriptors: Iterable[MeshDescriptor], skipped: int = 0):
        self.descriptors: dict[str, MeshDescriptor] = {}
        self.skipped = skipped
        self._name_index: dict[str, str] = {}
        self._entry_index: dict[str, str] = {}
        self.tree_index: dict[str, str] = {}
        for d in descriptors:
            if d.ui in self.descriptors:
                raise DuplicateDescriptorError(d.ui)
            self.descriptors[d.ui] = d
        # Preferred names win over entry terms at lookup time; among entry
        # terms the first-ingested descriptor keeps a contested spelling.
        for d in self.descriptors.values():
            self._name_index.setdefault(normalize_term(d.name), d.ui)
            for t in d.entry_terms:
                self._entry_index.setdefault(normalize_term(t), d.ui)
            for tn in d.tree_numbers:
                if tn in self.tree_index:
                    raise IngestError(
                        f"tree number {tn} claimed by both {self.tree_index[tn]} and {d.ui}"
                    )
                self.tree_index[tn] = d.ui
        self._sorted_trees = sorted(self.tree_index)

    def __len__(self) -> int:
        return len(self.descriptors)

    def __contains__(self, ui: str) -> bool:
        return ui in self.descriptors

    def lookup(self, term: str) -> MeshDescriptor | None:
        """Resolve a surface form to a descriptor, or None.

        Matching is case-folded and whitespace-normalized; a preferred-name
        match beats an entry-term match.
        """
        key = normalize_term(term)
        if not key:
            raise InputError("lookup term is empty after trimming")
        ui = self._name_index.get(key)
        if ui is None:
            ui = self._entry_index.get(key)
        return self.descriptors[ui] if ui is not None else None

    def neighbors(self, ui: str, direction: str, depth: int = 1) -> set[str]:
        """UIs related to ``ui`` through the tree-number hierarchy.

        broader: owners of strict dot-prefixes within ``depth`` levels up.
        narrower: owners of strict dot-extensions within ``depth`` levels down.
        sibling: owners of tree numbers sharing the same parent prefix
        (``depth`` ignored). The descriptor itself is never returned.
        """
        if ui not in self.descriptors:
            raise NotFoundError(f"unknown descriptor UI {ui!r}")
        if direction not in ("broader", "narrower", "sibling"):
            raise InputError(f"unknown direction {direction!r}")
        if direction != "sibling" and depth < 1:
            raise InputError("depth must be >= 1 for broader/narrower")

        found: set[str] = set()
        for tn in self.descriptors[ui].tree_numbers:
            if direction == "broader":
                parts = tn.split(".")
                for up in range(1, min(depth, len(parts) - 1) + 1):
                    owner = self.tree_index.get(".".join(parts[: len(parts) - up]))
                    if owner is not None:
                        found.add(owner)
            elif direction == "narrower":
                base_depth = tn.count(".")
                prefix = tn + "."
                lo = bisect.bisect_left(self._sorted_trees, prefix)
                for cand in self._sorted_trees[lo:]:
                    if not cand.startswith(prefix):
                        break
                    if cand.count(".") - base_depth <= depth:
                        found.add(self.tree_index[cand])
            else:  # sibling; top-level tree numbers have no parent
                if "." not in tn:
                    continue
                parent, _, _ = tn.rpartition(".")
                prefix = parent + "."
                lo = bisect.bisect_left(self._sorted_trees, prefix)
                for cand in self._sorted_trees[lo:]:
                    if not cand.startswith(prefix):
                        break
                    if "." not in cand[len(prefix):]:
                        found.add(self.tree_index[cand])
        found.discard(ui)
        return found

    def expand(self, term: str, policy: ExpansionPolicy | None = None) -> ExpansionSet:
        """Expand a seed term per the policy, with provenance labels.

        Priority under ``max_terms`` truncation is
        self > entry_term > narrower > broader; ties within a class break by
        ascending UI. The seed's scope note rides along as the definition.
        """
        policy = policy or ExpansionPolicy()
        seed = self.lookup(term)
        if seed is None:
            raise NotFoundError(
                f"term {normalize_term(term)!r} resolves to no descriptor"
            )

        out: list[ExpandedTerm] = [ExpandedTerm(seed.name, "self", seed.ui)]
        if policy.include_entry_terms:
            for t in seed.entry_terms:
                out.append(ExpandedTerm(t, "entry_term", seed.ui))
        if policy.include_narrower and policy.narrower_depth >= 1:
            for ui in sorted(self.neighbors(seed.ui, "narrower", policy.narrower_depth)):
                out.append(ExpandedTerm(self.descriptors[ui].name, "narrower", ui))
        if policy.include_broader:
            for ui in sorted(self.neighbors(seed.ui, "broader", 1)):
                out.append(ExpandedTerm(self.descriptors[ui].name, "broader", ui))

        seen: set[tuple[str, str]] = set()
        unique = []
        for et in out:
            key = (et.term, et.provenance)
            if key not in seen:
                seen.add(key)
                unique.append(et)
        return ExpansionSet(
            seed_ui=seed.ui,
            seed_name=seed.name,
            definition=seed.scope_note,
            terms=tuple(unique[: policy.max_terms]),
        )

    def to_tsv(self) -> str:
        """Serialized form used by the determinism check: UI-sorted TSV."""
        lines = []
        for ui in sorted(self.descriptors):
            d = self.descriptors[ui]
            lines.append(
                "\t".join(
                    [
                        d.ui,
                        d.name,
                        ";".join(d.tree_numbers),
                        d.scope_note,
                        "|".join(d.entry_terms),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


# --- ingestion -------------------------------------------------------------


def ingest_descriptors(source: str | Path | IO[bytes] | IO[str]) -> MeshKb:
    """Build a MeshKb from a descriptor XML file or the TSV fixture format.

    Records lacking a UI or a name are skipped and counted on
    ``MeshKb.skipped``. Same bytes in, same KB out.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        with open(path, "rb") as fh:
            return ingest_descriptors(fh)

    head, stream = _peek(source)
    if head.lstrip().startswith(b"<"):
        records, skipped = _parse_xml(stream)
    else:
        records, skipped = _parse_tsv(stream)
    return MeshKb(records, skipped=skipped)


def _peek(stream: IO) -> tuple[bytes, IO[bytes]]:
    data = stream.read()
    if isinstance(data, str):
        data = data.encode("utf-8")
    return data[:256], io.BytesIO(data)


def _parse_tsv(stream: IO[bytes]) -> tuple[list[MeshDescriptor], int]:
    records: list[MeshDescriptor] = []
    skipped = 0
    offset = 0
    for lineno, raw in enumerate(stream, start=1):
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise IngestError(
                f"line {lineno} is not valid UTF-8", offset=offset + e.start
            ) from e
        offset += len(raw)
        line = line.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        fields += [""] * (5 - len(fields))
        ui, name, trees, scope, entries = fields[:5]
        if not ui.strip() or not name.strip():
            skipped += 1
            continue
        records.append(
            MeshDescriptor(
                ui=ui.strip(),
                name=name.strip(),
                tree_numbers=tuple(
                    t.strip() for t in trees.split(";") if TREE_NUMBER_RE.match(t.strip())
                ),
                scope_note=scope.strip(),
                entry_terms=tuple(t.strip() for t in entries.split("|") if t.strip()),
            )
        )
    return records, skipped


def _parse_xml(stream: IO[bytes]) -> tuple[list[MeshDescriptor], int]:
    records: list[MeshDescriptor] = []
    skipped = 0
    try:
        for _, elem in ET.iterparse(stream, events=("end",)):
            if elem.tag != "DescriptorRecord":
                continue
            rec = _descriptor_from_element(elem)
            if rec is None:
                skipped += 1
            else:
                records.append(rec)
            elem.clear()
    except ET.ParseError as e:
        raise IngestError(
            f"malformed descriptor XML: {e.msg if hasattr(e, 'msg') else e}",
            offset=getattr(e, "position", (0, 0))[1],
        ) from e
    return records, skipped


def _descriptor_from_element(elem: ET.Element) -> MeshDescriptor | None:
    ui = (elem.findtext("DescriptorUI") or "").strip()
    name = (elem.findtext("DescriptorName/String") or "").strip()
    if not ui or not name:
        return None

    tree_numbers = []
    for tn in elem.findall("TreeNumberList/TreeNumber"):
        text = (tn.text or "").strip()
        if TREE_NUMBER_RE.match(text):
            tree_numbers.append(text)

    # Scope note lives on the preferred concept of the first ConceptList.
    scope = ""
    for concept in elem.findall("ConceptList/Concept"):
        note = (concept.findtext("ScopeNote") or "").strip()
        if concept.get("PreferredConceptYN") == "Y" and note:
            scope = note
            break
        if not scope and note:
            scope = note

    entry_terms = []
    for term in elem.findall("ConceptList/Concept/TermList/Term/String"):
        text = (term.text or "").strip()
        if text and text != name:
            entry_terms.append(text)

    return MeshDescriptor(
        ui=ui,
        name=name,
        tree_numbers=tuple(tree_numbers),
        scope_note=scope,
        entry_terms=tuple(dict.fromkeys(entry_terms)),
    )


def count_descriptor_records(source: str | Path) -> int:
    """Independent stream-count of DescriptorRecord elements (ingest oracle)."""
    n = 0
    with open(source, "rb") as fh:
        head = fh.read(256)
        fh.seek(0)
        if head.lstrip().startswith(b"<"):
            for _, elem in ET.iterparse(fh, events=("end",)):
                if elem.tag == "DescriptorRecord":
                    n += 1
                elem.clear()
        else:
            for raw in fh:
                line = raw.decode("utf-8").strip()
                if line and not line.startswith("#"):
                    n += 1
    return n
