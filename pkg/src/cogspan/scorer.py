"""Span scoring under strict and lenient matching.

Matching is one-to-one: a single long prediction can never claim credit for
several gold spans. Per instance we first try a deterministic greedy pairing
(largest overlap first); when that is submaximal and each side has at most
`EXACT_LIMIT` spans, an exact maximum bipartite matching replaces it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .corpus import CATEGORIES, AnnotationSet, Category, Span
from .errors import InputError

#: Per-side span cutoff for the exact matching fallback; beyond this, greedy.
EXACT_LIMIT = 12


class MatchCriterion(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"

    def __str__(self) -> str:
        return self.value


def _is_match(gold: Span, pred: Span, criterion: MatchCriterion) -> bool:
    if gold.category != pred.category:
        return False
    if criterion is MatchCriterion.STRICT:
        return gold.start == pred.start and gold.end == pred.end
    return gold.overlap(pred) >= 1


def _candidate_order(gold: Sequence[Span], pred: Sequence[Span], criterion: MatchCriterion):
    pairs = [
        (gi, pi)
        for gi, g in enumerate(gold)
        for pi, p in enumerate(pred)
        if _is_match(g, p, criterion)
    ]
    pairs.sort(
        key=lambda gp: (
            -gold[gp[0]].overlap(pred[gp[1]]),
            gold[gp[0]].start,
            gold[gp[0]].end,
            pred[gp[1]].start,
            pred[gp[1]].end,
            gold[gp[0]].category.value,
        )
    )
    return pairs


def _greedy_matching(gold, pred, candidates) -> list[tuple[int, int]]:
    used_g: set[int] = set()
    used_p: set[int] = set()
    out: list[tuple[int, int]] = []
    for gi, pi in candidates:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        out.append((gi, pi))
    return out


def _exact_matching(n_gold: int, candidates: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    # Kuhn's augmenting-path maximum matching; deterministic because golds are
    # processed in index order and edges in candidate order.
    adj: dict[int, list[int]] = {}
    for gi, pi in candidates:
        adj.setdefault(gi, []).append(pi)
    match_p: dict[int, int] = {}

    def try_augment(gi: int, visited: set[int]) -> bool:
        for pi in adj.get(gi, []):
            if pi in visited:
                continue
            visited.add(pi)
            if pi not in match_p or try_augment(match_p[pi], visited):
                match_p[pi] = gi
                return True
        return False

    for gi in range(n_gold):
        try_augment(gi, set())
    return sorted((gi, pi) for pi, gi in match_p.items())


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[Span, Span], ...]
    unmatched_gold: tuple[Span, ...]
    unmatched_pred: tuple[Span, ...]


def match_spans(
    gold: Sequence[Span], pred: Sequence[Span], criterion: MatchCriterion
) -> MatchResult:
    """One-to-one matching between one document's gold and predicted spans.

    The instance must come from a single document; `Span` carries no document
    reference, so callers scoring several documents go through `score`, which
    groups annotation sets by doc id before delegating here.
    """
    candidates = _candidate_order(gold, pred, criterion)
    matching = _greedy_matching(gold, pred, candidates)
    if len(gold) <= EXACT_LIMIT and len(pred) <= EXACT_LIMIT:
        exact = _exact_matching(len(gold), candidates)
        if len(exact) > len(matching):
            matching = exact
    matched_g = {gi for gi, _ in matching}
    matched_p = {pi for _, pi in matching}
    return MatchResult(
        pairs=tuple((gold[gi], pred[pi]) for gi, pi in sorted(matching)),
        unmatched_gold=tuple(g for i, g in enumerate(gold) if i not in matched_g),
        unmatched_pred=tuple(p for i, p in enumerate(pred) if i not in matched_p),
    )


# ---------------------------------------------------------------------------
# scores


@dataclass(frozen=True)
class CategoryCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def gold_support(self) -> int:
        return self.tp + self.fn

    @property
    def pred_support(self) -> int:
        return self.tp + self.fp

    def __add__(self, other: "CategoryCounts") -> "CategoryCounts":
        return CategoryCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Scores":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(precision=p, recall=r, f1=f1)


TAXONOMY_KINDS = ("exact", "boundary_error", "category_confusion", "spurious", "miss")


@dataclass(frozen=True)
class CriterionReport:
    per_category: Mapping[Category, Scores]
    micro: Scores
    macro: Scores
    counts: Mapping[Category, CategoryCounts]


@dataclass(frozen=True)
class EvalReport:
    criteria: Mapping[MatchCriterion, CriterionReport]
    gold_support: Mapping[Category, int]
    pred_support: Mapping[Category, int]
    taxonomy: Mapping[str, int]

    def to_dict(self) -> dict:
        return {
            "criteria": {
                crit.value: {
                    "per_category": {
                        cat.value: {
                            "precision": rep.per_category[cat].precision,
                            "recall": rep.per_category[cat].recall,
                            "f1": rep.per_category[cat].f1,
                            "tp": rep.counts[cat].tp,
                            "fp": rep.counts[cat].fp,
                            "fn": rep.counts[cat].fn,
                        }
                        for cat in CATEGORIES
                    },
                    "micro": vars(rep.micro),
                    "macro": vars(rep.macro),
                }
                for crit, rep in self.criteria.items()
            },
            "gold_support": {cat.value: self.gold_support[cat] for cat in CATEGORIES},
            "pred_support": {cat.value: self.pred_support[cat] for cat in CATEGORIES},
            "taxonomy": {kind: self.taxonomy[kind] for kind in TAXONOMY_KINDS},
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EvalReport":
        criteria = {}
        for crit_name, rep in raw["criteria"].items():
            crit = MatchCriterion(crit_name)
            per_category = {}
            counts = {}
            for cat_name, sc in rep["per_category"].items():
                cat = Category.parse(cat_name)
                per_category[cat] = Scores(sc["precision"], sc["recall"], sc["f1"])
                counts[cat] = CategoryCounts(sc["tp"], sc["fp"], sc["fn"])
            criteria[crit] = CriterionReport(
                per_category=per_category,
                micro=Scores(**rep["micro"]),
                macro=Scores(**rep["macro"]),
                counts=counts,
            )
        return cls(
            criteria=criteria,
            gold_support={Category.parse(c): n for c, n in raw["gold_support"].items()},
            pred_support={Category.parse(c): n for c, n in raw["pred_support"].items()},
            taxonomy=dict(raw["taxonomy"]),
        )


def _group_by_doc(sets: Iterable[AnnotationSet]) -> dict[str, list[Span]]:
    grouped: dict[str, list[Span]] = {}
    for aset in sets:
        grouped.setdefault(aset.doc_id, []).extend(aset.spans)
    return grouped


def _doc_counts(
    gold: Sequence[Span], pred: Sequence[Span], criterion: MatchCriterion
) -> dict[Category, CategoryCounts]:
    result = match_spans(gold, pred, criterion)
    tp: Counter = Counter(g.category for g, _ in result.pairs)
    fn: Counter = Counter(s.category for s in result.unmatched_gold)
    fp: Counter = Counter(s.category for s in result.unmatched_pred)
    return {
        cat: CategoryCounts(tp.get(cat, 0), fp.get(cat, 0), fn.get(cat, 0)) for cat in CATEGORIES
    }


def score(
    gold: Sequence[AnnotationSet],
    pred: Sequence[AnnotationSet],
    criteria: Iterable[MatchCriterion] = (MatchCriterion.STRICT, MatchCriterion.LENIENT),
) -> EvalReport:
    """Score predictions against gold, per category and micro/macro.

    Precision and recall fall back to 0 on zero denominators. The macro
    average skips categories with neither gold nor predicted spans, so an
    absent category costs nothing while a hallucinated one drags the mean
    down. Documents missing from `pred` count as zero predictions.
    """
    gold_by_doc = _group_by_doc(gold)
    pred_by_doc = _group_by_doc(pred)
    unknown = set(pred_by_doc) - set(gold_by_doc)
    if unknown:
        raise InputError(f"predictions reference documents without gold: {sorted(unknown)}")

    criteria = tuple(criteria)
    reports: dict[MatchCriterion, CriterionReport] = {}
    for criterion in criteria:
        totals: dict[Category, CategoryCounts] = {cat: CategoryCounts() for cat in CATEGORIES}
        for doc_id, gold_spans in gold_by_doc.items():
            doc_counts = _doc_counts(gold_spans, pred_by_doc.get(doc_id, []), criterion)
            for cat in CATEGORIES:
                totals[cat] = totals[cat] + doc_counts[cat]
        per_category = {
            cat: Scores.from_counts(c.tp, c.fp, c.fn) for cat, c in totals.items()
        }
        included = [
            cat for cat in CATEGORIES
            if totals[cat].gold_support > 0 or totals[cat].pred_support > 0
        ]
        micro = Scores.from_counts(
            sum(totals[c].tp for c in CATEGORIES),
            sum(totals[c].fp for c in CATEGORIES),
            sum(totals[c].fn for c in CATEGORIES),
        )
        if included:
            macro = Scores(
                precision=sum(per_category[c].precision for c in included) / len(included),
                recall=sum(per_category[c].recall for c in included) / len(included),
                f1=sum(per_category[c].f1 for c in included) / len(included),
            )
        else:
            macro = Scores(0.0, 0.0, 0.0)
        reports[criterion] = CriterionReport(
            per_category=per_category, micro=micro, macro=macro, counts=totals
        )

    any_crit = criteria[0]
    gold_support = {
        cat: reports[any_crit].counts[cat].gold_support for cat in CATEGORIES
    }
    pred_support = {
        cat: reports[any_crit].counts[cat].pred_support for cat in CATEGORIES
    }
    return EvalReport(
        criteria=reports,
        gold_support=gold_support,
        pred_support=pred_support,
        taxonomy=error_taxonomy(gold, pred),
    )


def error_taxonomy(
    gold: Sequence[AnnotationSet], pred: Sequence[AnnotationSet]
) -> dict[str, int]:
    """Classify every predicted span into exactly one failure (or success) kind.

    Per document: strict one-to-one matches are `exact`; a lenient one-to-one
    match among the rest is a `boundary_error`, as is any leftover prediction
    that still overlaps same-category gold (the fragment/merge failure mode).
    A leftover overlapping only other-category gold is `category_confusion`
    (the confused gold is not consumed and may still be a `miss`); no gold
    overlap at all is `spurious`. Gold spans never paired strictly or
    leniently count as `miss`.
    """
    gold_by_doc = _group_by_doc(gold)
    pred_by_doc = _group_by_doc(pred)
    unknown = set(pred_by_doc) - set(gold_by_doc)
    if unknown:
        raise InputError(f"predictions reference documents without gold: {sorted(unknown)}")

    counts = {kind: 0 for kind in TAXONOMY_KINDS}
    for doc_id, gold_spans in gold_by_doc.items():
        pred_spans = pred_by_doc.get(doc_id, [])
        strict = match_spans(gold_spans, pred_spans, MatchCriterion.STRICT)
        counts["exact"] += len(strict.pairs)
        lenient = match_spans(
            list(strict.unmatched_gold), list(strict.unmatched_pred), MatchCriterion.LENIENT
        )
        counts["boundary_error"] += len(lenient.pairs)
        counts["miss"] += len(lenient.unmatched_gold)
        for p in lenient.unmatched_pred:
            same = any(p.overlap(g) >= 1 and g.category == p.category for g in gold_spans)
            other = any(p.overlap(g) >= 1 and g.category != p.category for g in gold_spans)
            if same:
                counts["boundary_error"] += 1
            elif other:
                counts["category_confusion"] += 1
            else:
                counts["spurious"] += 1
    return counts
