"""The deterministic synthetic corpus generator."""

from __future__ import annotations

import pytest

from cogspan.corpus import (
    CATEGORIES,
    Category,
    category_histogram,
    serialize_corpus,
    validate_corpus,
)
from cogspan.errors import SynthSpecError
from cogspan.synth import SynthSpec, generate_synthetic_corpus, parse_synth_spec


def counts(**kwargs) -> dict:
    return {Category.parse(name): value for name, value in kwargs.items()}


def test_all_zero_spec_gives_filler_documents():
    corpus = generate_synthetic_corpus(SynthSpec(), seed=1)
    assert len(corpus.documents) == 3
    assert all(doc.text for doc in corpus.documents)
    assert all(not aset.spans for aset in corpus.annotations)
    assert validate_corpus(corpus) == []


def test_histogram_matches_spec_exactly():
    target = {cat: 10 for cat in CATEGORIES}
    target[Category.ACTION] = 100
    target[Category.EMOTION] = 56
    corpus = generate_synthetic_corpus(SynthSpec(counts=target), seed=2)
    assert category_histogram(corpus, "gold") == target
    assert validate_corpus(corpus) == []


def test_same_seed_is_byte_identical():
    spec = SynthSpec(counts=counts(action=12, emotion=4), nesting_rate=0.4)
    a = serialize_corpus(generate_synthetic_corpus(spec, seed=33))
    b = serialize_corpus(generate_synthetic_corpus(spec, seed=33))
    assert a == b
    c = serialize_corpus(generate_synthetic_corpus(spec, seed=34))
    assert a != c


def test_nesting_produces_contained_spans():
    spec = SynthSpec(counts=counts(action=10, sensory=10), nesting_rate=1.0)
    corpus = generate_synthetic_corpus(spec, seed=8)
    nested_pairs = 0
    for aset in corpus.annotations:
        for outer in aset.spans:
            for inner in aset.spans:
                if inner is not outer and outer.start <= inner.start and inner.end <= outer.end:
                    nested_pairs += 1
    assert nested_pairs > 0
    assert validate_corpus(corpus) == []


def test_unique_surfaces_hold():
    spec = SynthSpec(counts={cat: 4 for cat in CATEGORIES}, nesting_rate=0.3, unique_surfaces=True)
    corpus = generate_synthetic_corpus(spec, seed=14)
    for aset in corpus.annotations:
        doc = corpus.doc_by_id(aset.doc_id)
        for span in aset.spans:
            assert doc.text.count(span.surface) == 1


def test_explicit_doc_count():
    spec = SynthSpec(counts=counts(action=6), n_docs=2)
    corpus = generate_synthetic_corpus(spec, seed=3)
    assert len(corpus.documents) == 2


def test_invalid_specs_rejected():
    with pytest.raises(SynthSpecError):
        generate_synthetic_corpus(SynthSpec(counts=counts(action=-1)), seed=0)
    with pytest.raises(SynthSpecError):
        generate_synthetic_corpus(SynthSpec(nesting_rate=0.5), seed=0)
    with pytest.raises(SynthSpecError):
        generate_synthetic_corpus(SynthSpec(counts=counts(action=1), nesting_rate=1.5), seed=0)
    with pytest.raises(SynthSpecError):
        generate_synthetic_corpus(SynthSpec(counts=counts(action=1), n_docs=0), seed=0)


def test_parse_synth_spec_from_json_mapping():
    raw = {"counts": {"action": 5, "emotion": 2}, "nesting_rate": 0.25, "n_docs": 4,
           "unique_surfaces": True}
    spec = parse_synth_spec(raw)
    assert spec.counts[Category.ACTION] == 5
    assert spec.nesting_rate == 0.25
    assert spec.n_docs == 4
    assert spec.unique_surfaces


def test_parse_synth_spec_rejects_unknown_category():
    with pytest.raises(Exception) as exc_info:
        parse_synth_spec({"counts": {"weather": 3}})
    assert "weather" in str(exc_info.value)
