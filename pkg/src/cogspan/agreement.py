"""Inter-annotator agreement: pairwise entity F1 and per-category kappa.

Kappa is computed at the character-position level: every character of every
document gets a binary in-span/out-of-span label per category and per
annotator, pooled across documents. Character positions stay well-defined
under nesting and overlap, where token-level BIO tagging does not.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import CATEGORIES, AnnotationSet, Category, Corpus
from .errors import InputError

#: Marker for categories where chance agreement is 1 and kappa is undefined.
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class AgreementReport:
    entity_f1: float
    kappa_per_category: Mapping[Category, float | str]
    kappa_macro: float | None

    def to_dict(self) -> dict:
        return {
            "entity_f1": self.entity_f1,
            "kappa_per_category": {
                cat.value: self.kappa_per_category[cat] for cat in CATEGORIES
            },
            "kappa_macro": self.kappa_macro,
        }


def _index_by_doc(sets: Sequence[AnnotationSet], name: str) -> dict[str, AnnotationSet]:
    by_doc: dict[str, AnnotationSet] = {}
    for aset in sets:
        if aset.doc_id in by_doc:
            raise InputError(f"{name}: multiple annotation sets for document {aset.doc_id!r}")
        by_doc[aset.doc_id] = aset
    return by_doc


def _paired(a: Sequence[AnnotationSet], b: Sequence[AnnotationSet]):
    by_a = _index_by_doc(a, "first annotator")
    by_b = _index_by_doc(b, "second annotator")
    if set(by_a) != set(by_b):
        only_a = sorted(set(by_a) - set(by_b))
        only_b = sorted(set(by_b) - set(by_a))
        raise InputError(
            f"annotators cover different documents (only first: {only_a}, only second: {only_b})"
        )
    return by_a, by_b


def pairwise_entity_f1(a: Sequence[AnnotationSet], b: Sequence[AnnotationSet]) -> float:
    """Corpus-level micro F1 between two annotators under strict matching.

    Strict matching over (start, end, category) is symmetric, so swapping the
    annotators yields the identical value. Two empty annotations agree
    perfectly and score 1.0.
    """
    by_a, by_b = _paired(a, b)
    tp = 0
    total_a = 0
    total_b = 0
    for doc_id in by_a:
        spans_a = {s.key() for s in by_a[doc_id].spans}
        spans_b = {s.key() for s in by_b[doc_id].spans}
        tp += len(spans_a & spans_b)
        total_a += len(spans_a)
        total_b += len(spans_b)
    if total_a + total_b == 0:
        return 1.0
    return 2 * tp / (total_a + total_b)


def token_kappa(
    a: Sequence[AnnotationSet], b: Sequence[AnnotationSet], corpus: Corpus
) -> tuple[dict[Category, float | str], float | None]:
    """Per-category Cohen's kappa over pooled character positions.

    For category c, position labels are "inside some c-span" per annotator;
    kappa = (p_o - p_e) / (1 - p_e). When chance agreement p_e is 1 (both
    annotators constant), the category is reported as `DEGENERATE` and left
    out of the macro mean; the macro is None when every category degenerates.
    """
    by_a, by_b = _paired(a, b)

    # Tallies per category: total positions, marked-by-a, marked-by-b, both-marked.
    total = 0
    marked_a = {cat: 0 for cat in CATEGORIES}
    marked_b = {cat: 0 for cat in CATEGORIES}
    both = {cat: 0 for cat in CATEGORIES}
    for doc_id in by_a:
        doc = corpus.doc_by_id(doc_id)
        n = len(doc.text)
        total += n
        for cat in CATEGORIES:
            mask_a = _coverage(by_a[doc_id], cat, n)
            mask_b = _coverage(by_b[doc_id], cat, n)
            marked_a[cat] += sum(mask_a)
            marked_b[cat] += sum(mask_b)
            both[cat] += sum(1 for x, y in zip(mask_a, mask_b) if x and y)

    kappas: dict[Category, float | str] = {}
    defined: list[float] = []
    for cat in CATEGORIES:
        if total == 0:
            kappas[cat] = DEGENERATE
            continue
        pa1 = marked_a[cat] / total
        pb1 = marked_b[cat] / total
        p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
        agree = both[cat] + (total - marked_a[cat] - marked_b[cat] + both[cat])
        p_o = agree / total
        if p_e >= 1.0:
            kappas[cat] = DEGENERATE
            continue
        kappa = (p_o - p_e) / (1 - p_e)
        kappas[cat] = kappa
        defined.append(kappa)

    macro = sum(defined) / len(defined) if defined else None
    return kappas, macro


def _coverage(aset: AnnotationSet, category: Category, length: int) -> list[bool]:
    mask = [False] * length
    for span in aset.spans:
        if span.category is category:
            for i in range(span.start, min(span.end, length)):
                mask[i] = True
    return mask


def agreement_report(
    a: Sequence[AnnotationSet], b: Sequence[AnnotationSet], corpus: Corpus
) -> AgreementReport:
    kappas, macro = token_kappa(a, b, corpus)
    return AgreementReport(
        entity_f1=pairwise_entity_f1(a, b),
        kappa_per_category=kappas,
        kappa_macro=macro,
    )
