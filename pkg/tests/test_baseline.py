"""Lexicon validation and the offline phrase tagger."""

from __future__ import annotations

import json
import random

import pytest

from cogspan.baseline import lexicon_tag, parse_lexicon, starter_lexicon, validate_lexicon
from cogspan.corpus import CATEGORIES, Category
from cogspan.errors import SchemaValidationError

from conftest import make_doc

L = Category.LOCATION
S = Category.SENSORY
SI = Category.SOCIAL_INTERACTION


def test_starter_lexicon_is_valid_and_covers_everything():
    lexicon = starter_lexicon()
    validate_lexicon(lexicon)
    assert set(lexicon) == set(CATEGORIES)
    assert all(lexicon[cat] for cat in CATEGORIES)


def test_validate_rejects_empty_pattern():
    with pytest.raises(SchemaValidationError):
        validate_lexicon({L: ["Paris", ""]})


def test_validate_rejects_duplicate_pattern():
    with pytest.raises(SchemaValidationError):
        validate_lexicon({L: ["Paris", "Paris"]})


def test_parse_lexicon_round_trip():
    raw = json.dumps({"location": ["Paris"], "time": ["Monday"]}).encode("utf-8")
    lexicon = parse_lexicon(raw)
    assert lexicon[L] == ["Paris"]
    assert lexicon[Category.TIME] == ["Monday"]


def test_tag_example_sentence():
    doc = make_doc("d1", "We laughed together in Paris")
    spans = lexicon_tag(doc, starter_lexicon())
    assert [(s.category, s.surface) for s in spans] == [
        (SI, "We laughed together"),
        (L, "Paris"),
    ]


def test_tag_empty_lexicon():
    assert lexicon_tag(make_doc("d1", "We laughed together in Paris"), {}) == []


def test_tag_respects_word_boundaries():
    doc = make_doc("d1", "The Parisian metro")
    assert lexicon_tag(doc, {L: ["Paris"]}) == []


def test_tag_is_case_insensitive_but_keeps_document_casing():
    doc = make_doc("d1", "we went to PARIS")
    spans = lexicon_tag(doc, {L: ["Paris"]})
    assert len(spans) == 1
    assert spans[0].surface == "PARIS"


def test_tag_longest_pattern_first_within_category():
    doc = make_doc("d1", "the hot oven glowed")
    spans = lexicon_tag(doc, {S: ["hot", "hot oven"]})
    assert [(s.surface,) for s in spans] == [("hot oven",)]


def test_tag_allows_cross_category_overlap():
    doc = make_doc("d1", "the hot oven glowed")
    spans = lexicon_tag(doc, {S: ["hot oven"], Category.ACTION: ["oven glowed"]})
    assert {(s.category, s.surface) for s in spans} == {
        (S, "hot oven"),
        (Category.ACTION, "oven glowed"),
    }


def test_tag_finds_repeated_occurrences():
    doc = make_doc("d1", "Paris, then Paris again")
    spans = lexicon_tag(doc, {L: ["Paris"]})
    assert [s.start for s in spans] == [0, 12]


def test_tag_output_independent_of_declaration_order():
    doc = make_doc("d1", "felt pain near the hot oven on Monday in Paris")
    lexicon = {S: ["felt pain", "hot oven"], Category.TIME: ["Monday"], L: ["Paris"]}
    expected = lexicon_tag(doc, lexicon)
    rng = random.Random(3)
    for _ in range(5):
        shuffled = {}
        cats = list(lexicon)
        rng.shuffle(cats)
        for cat in cats:
            patterns = lexicon[cat][:]
            rng.shuffle(patterns)
            shuffled[cat] = patterns
        assert lexicon_tag(doc, shuffled) == expected


def test_tag_output_sorted_by_offset():
    doc = make_doc("d1", "Monday in Paris, felt pain")
    spans = lexicon_tag(doc, starter_lexicon())
    assert spans == sorted(spans, key=lambda s: (s.start, s.end, s.category.value))
