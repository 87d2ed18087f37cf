from __future__ import annotations

import pytest

from srkit.concepts import (
    ResearchQuestion,
    extract_seeds,
    load_stopwords,
    tokenize,
)
from srkit.errors import InputError

STOPWORDS = load_stopwords()


class TestTokenize:
    def test_punctuation_stripped(self):
        assert tokenize("Hepatitis A?") == [
            ("Hepatitis", (0, 9)),
            ("A", (10, 11)),
        ]

    def test_empty_input(self):
        assert tokenize("") == []

    def test_hyphen_retained(self):
        assert tokenize("surgical-site infections") == [
            ("surgical-site", (0, 13)),
            ("infections", (14, 24)),
        ]

    def test_spans_index_original_string(self):
        text = "Long-term outcomes, 2020 (cohort)."
        for token, (start, end) in tokenize(text):
            assert text[start:end] == token


class TestExtractSeeds:
    def test_hepatitis_a_question(self, core_kb):
        question = ResearchQuestion("What are the causes of Hepatitis A?")
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        resolved = [s for s in seeds if s.descriptor_ui]
        assert len(resolved) == 1
        assert resolved[0].surface == "Hepatitis A"
        assert resolved[0].descriptor_ui == "D006506"

    def test_suture_infections_prevention_question(self, core_kb):
        question = ResearchQuestion(
            "Antimicrobial agents and suture techniques in preventing "
            "surgical site infections"
        )
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        resolved_uis = {s.descriptor_ui for s in seeds if s.descriptor_ui}
        assert core_kb.lookup("suture").ui in resolved_uis
        assert core_kb.lookup("infections").ui in resolved_uis
        assert core_kb.lookup("preventing").ui in resolved_uis

    def test_all_stopwords_yield_nothing(self, core_kb):
        question = ResearchQuestion("the of and")
        assert extract_seeds(question, core_kb, STOPWORDS) == []

    def test_spans_disjoint_and_sorted(self, core_kb):
        question = ResearchQuestion(
            "Do absorbable sutures and antibiotic prophylaxis prevent "
            "surgical wound infection after hepatitis A vaccination?"
        )
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        spans = [s.span for s in seeds]
        assert spans == sorted(spans)
        for (a, b), (c, d) in zip(spans, spans[1:]):
            assert b <= c

    def test_surface_is_the_text_slice(self, core_kb):
        question = ResearchQuestion("Barbed sutures versus catgut for wound closure")
        for seed in extract_seeds(question, core_kb, STOPWORDS):
            assert question.text[seed.span[0] : seed.span[1]] == seed.surface

    def test_resolved_seeds_satisfy_lookup(self, core_kb):
        question = ResearchQuestion(
            "Vaccination against hepatitis A and acetaminophen use in liver diseases"
        )
        for seed in extract_seeds(question, core_kb, STOPWORDS):
            if seed.descriptor_ui:
                assert core_kb.lookup(seed.surface).ui == seed.descriptor_ui

    def test_longest_match_wins(self, core_kb):
        question = ResearchQuestion("Treatment with absorbable sutures after surgery")
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        resolved = {s.descriptor_ui for s in seeds if s.descriptor_ui}
        assert core_kb.lookup("Absorbable Sutures").ui in resolved
        assert core_kb.lookup("Sutures").ui not in resolved

    def test_idempotent_over_matched_surfaces(self, core_kb):
        question = ResearchQuestion(
            "Antimicrobial agents and suture techniques in preventing "
            "surgical site infections"
        )
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        matched = " ".join(s.surface for s in seeds if s.descriptor_ui)
        again = extract_seeds(ResearchQuestion(matched), core_kb, STOPWORDS)
        assert {s.descriptor_ui for s in seeds if s.descriptor_ui} == {
            s.descriptor_ui for s in again if s.descriptor_ui
        }

    def test_unresolved_content_tokens_are_kept(self, core_kb):
        question = ResearchQuestion("What are the causes of Hepatitis A?")
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        unresolved = [s for s in seeds if s.descriptor_ui is None]
        assert [s.surface for s in unresolved] == ["causes"]

    def test_short_and_stopword_tokens_dropped(self, core_kb):
        question = ResearchQuestion("Is it the flu now?")
        seeds = extract_seeds(question, core_kb, STOPWORDS)
        assert seeds == []


class TestResearchQuestion:
    def test_empty_is_an_input_error(self):
        with pytest.raises(InputError):
            ResearchQuestion("   ")

    def test_too_long_is_an_input_error(self):
        with pytest.raises(InputError):
            ResearchQuestion("x" * 2001)

    def test_language_tag_default(self):
        assert ResearchQuestion("valid question").language_tag == "en"


def test_stopword_file_loading(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("Foo\nbar\n\n", encoding="utf-8")
    words = load_stopwords(path)
    assert words == frozenset({"foo", "bar"})


def test_packaged_stopword_list_size():
    assert len(STOPWORDS) >= 150
