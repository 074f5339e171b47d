"""Span-level annotation tooling for first-person narrative corpora.

The package covers the full loop: corpus files and validation, stratified
splitting, inter-annotator agreement, prompt construction and SFT export,
endpoint extraction with offset grounding, a lexicon baseline, span scoring
with an error taxonomy, and report rendering.
"""

from .corpus import (
    CATEGORIES,
    GOLD_ANNOTATOR,
    AnnotationSet,
    Category,
    Corpus,
    Document,
    DocumentMeta,
    SessionKind,
    Span,
    SplitAssignment,
    category_histogram,
    parse_corpus,
    serialize_corpus,
    stratified_split,
    validate_corpus,
)
from .scorer import EvalReport, MatchCriterion, error_taxonomy, match_spans, score
from .agreement import AgreementReport, agreement_report, pairwise_entity_f1, token_kappa

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES",
    "GOLD_ANNOTATOR",
    "AgreementReport",
    "AnnotationSet",
    "Category",
    "Corpus",
    "Document",
    "DocumentMeta",
    "EvalReport",
    "MatchCriterion",
    "SessionKind",
    "Span",
    "SplitAssignment",
    "agreement_report",
    "category_histogram",
    "error_taxonomy",
    "match_spans",
    "pairwise_entity_f1",
    "parse_corpus",
    "score",
    "serialize_corpus",
    "stratified_split",
    "token_kappa",
    "validate_corpus",
    "__version__",
]
