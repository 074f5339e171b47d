"""Entity F1 and character-level kappa between annotator pairs."""

from __future__ import annotations

import random

import pytest

from cogspan.agreement import (
    DEGENERATE,
    agreement_report,
    pairwise_entity_f1,
    token_kappa,
)
from cogspan.corpus import AnnotationSet, Category, Corpus, Span
from cogspan.errors import InputError

from conftest import make_doc

A = Category.ACTION
E = Category.EMOTION


def span(start, end, cat=A):
    return Span(start=start, end=end, category=cat, surface="x" * (end - start))


def aset(doc_id, annotator, spans):
    return AnnotationSet(doc_id=doc_id, annotator_id=annotator, spans=spans)


def one_doc_corpus(n_chars=40):
    return Corpus([make_doc("d1", "x" * n_chars)], [])


# ---------------------------------------------------------------------------
# entity F1


def test_entity_f1_identity():
    a = [aset("d1", "a", [span(0, 5), span(10, 14, E)])]
    b = [aset("d1", "b", [span(0, 5), span(10, 14, E)])]
    assert pairwise_entity_f1(a, b) == 1.0


def test_entity_f1_worked_example():
    a = [aset("d1", "a", [span(0, 5), span(10, 14, Category.TIME)])]
    b = [aset("d1", "b", [span(0, 5)])]
    assert pairwise_entity_f1(a, b) == pytest.approx(2 / 3, abs=1e-12)


def test_entity_f1_empty_side_is_zero():
    a = [aset("d1", "a", [span(0, 5)])]
    b = [aset("d1", "b", [])]
    assert pairwise_entity_f1(a, b) == 0.0


def test_entity_f1_both_empty_is_one():
    a = [aset("d1", "a", [])]
    b = [aset("d1", "b", [])]
    assert pairwise_entity_f1(a, b) == 1.0


def test_entity_f1_same_span_in_different_docs_does_not_count():
    a = [aset("d1", "a", [span(0, 5)]), aset("d2", "a", [])]
    b = [aset("d1", "b", []), aset("d2", "b", [span(0, 5)])]
    assert pairwise_entity_f1(a, b) == 0.0


def test_entity_f1_symmetric():
    rng = random.Random(42)
    for _ in range(30):
        spans_a = [span(rng.randrange(20), rng.randrange(21, 40)) for _ in range(rng.randrange(4))]
        spans_b = [span(rng.randrange(20), rng.randrange(21, 40)) for _ in range(rng.randrange(4))]
        a = [aset("d1", "a", spans_a)]
        b = [aset("d1", "b", spans_b)]
        assert pairwise_entity_f1(a, b) == pairwise_entity_f1(b, a)


def test_entity_f1_doc_mismatch_rejected():
    a = [aset("d1", "a", [])]
    b = [aset("d2", "b", [])]
    with pytest.raises(InputError):
        pairwise_entity_f1(a, b)


def test_two_sets_for_one_doc_rejected():
    a = [aset("d1", "a", []), aset("d1", "a", [])]
    b = [aset("d1", "b", [])]
    with pytest.raises(InputError):
        pairwise_entity_f1(a, b)


# ---------------------------------------------------------------------------
# kappa


def test_kappa_identical_annotations():
    corpus = one_doc_corpus()
    spans = [span(0, 5), span(20, 30, E)]
    per_cat, macro = token_kappa(
        [aset("d1", "a", spans)], [aset("d1", "b", spans)], corpus
    )
    assert per_cat[A] == 1.0
    assert per_cat[E] == 1.0
    assert macro == 1.0


def test_kappa_hand_derived_point_eight():
    # 10 characters; a marks [0,5), b marks [0,4): p_o = 0.9, p_e = 0.5, kappa = 0.8
    corpus = one_doc_corpus(10)
    per_cat, _ = token_kappa(
        [aset("d1", "a", [span(0, 5)])], [aset("d1", "b", [span(0, 4)])], corpus
    )
    assert per_cat[A] == pytest.approx(0.8, abs=1e-12)


def test_kappa_unmarked_category_is_degenerate():
    corpus = one_doc_corpus()
    per_cat, macro = token_kappa(
        [aset("d1", "a", [span(0, 5)])], [aset("d1", "b", [span(0, 5)])], corpus
    )
    assert per_cat[E] == DEGENERATE
    assert per_cat[A] == 1.0
    assert macro == 1.0  # degenerate categories stay out of the mean


def test_kappa_all_degenerate_has_no_macro():
    corpus = one_doc_corpus()
    per_cat, macro = token_kappa([aset("d1", "a", [])], [aset("d1", "b", [])], corpus)
    assert all(v == DEGENERATE for v in per_cat.values())
    assert macro is None


def test_kappa_symmetric_and_bounded():
    corpus = one_doc_corpus(60)
    rng = random.Random(7)
    for _ in range(30):
        def random_spans():
            out = []
            for _ in range(rng.randrange(4)):
                start = rng.randrange(50)
                out.append(span(start, start + rng.randrange(1, 10), rng.choice([A, E])))
            return out

        sa, sb = random_spans(), random_spans()
        ab_cat, ab_macro = token_kappa([aset("d1", "a", sa)], [aset("d1", "b", sb)], corpus)
        ba_cat, ba_macro = token_kappa([aset("d1", "b", sb)], [aset("d1", "a", sa)], corpus)
        assert ab_cat == ba_cat
        assert ab_macro == ba_macro
        for value in ab_cat.values():
            if value != DEGENERATE:
                assert -1.0 <= value <= 1.0


def test_kappa_pools_positions_across_documents():
    docs = [make_doc("d1", "x" * 10), make_doc("d2", "x" * 10)]
    corpus = Corpus(docs, [])
    # 20 pooled positions: 8 both-marked, 2+2 single-marked, 8 neither.
    # p_o = 16/20, marginals 10/20 each, p_e = 0.5, kappa = 0.6.
    a = [aset("d1", "a", [span(0, 5)]), aset("d2", "a", [span(0, 5)])]
    b = [aset("d1", "b", [span(0, 5)]), aset("d2", "b", [span(2, 7)])]
    per_cat, _ = token_kappa(a, b, corpus)
    assert per_cat[A] == pytest.approx(0.6, abs=1e-12)


def test_agreement_report_shape():
    corpus = one_doc_corpus()
    spans = [span(0, 5)]
    report = agreement_report([aset("d1", "a", spans)], [aset("d1", "b", spans)], corpus)
    assert report.entity_f1 == 1.0
    assert report.kappa_per_category[A] == 1.0
    raw = report.to_dict()
    assert raw["entity_f1"] == 1.0
    assert raw["kappa_per_category"]["action"] == 1.0
    assert raw["kappa_per_category"]["emotion"] == DEGENERATE
    assert raw["kappa_macro"] == 1.0
