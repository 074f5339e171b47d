"""Deterministic synthetic corpus generation for tests and demos.

Documents are assembled phrase by phrase, and gold spans are recorded at the
moment each phrase is written, so offsets are correct by construction rather
than by post-hoc search.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping

from .baseline import Lexicon, starter_lexicon
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
)
from .errors import SynthSpecError

FILLER_WORDS = (
    "meanwhile",
    "then",
    "and",
    "so",
    "later",
    "afterwards",
    "it",
    "was",
    "quite",
    "calm",
    "there",
    "during",
    "that",
    "moment",
    "we",
    "went",
    "on",
    "again",
)

#: Lead-ins that wrap an inner phrase to form a nested outer span.
NEST_PREFIXES: Mapping[Category, str] = {
    Category.LOCATION: "somewhere near the ",
    Category.TIME: "around the hour of ",
    Category.SENSORY: "noticing the ",
    Category.ACTION: "reaching toward the ",
    Category.THOUGHT: "wondering about the ",
    Category.EMOTION: "delighted by the ",
    Category.SOCIAL_INTERACTION: "telling them about the ",
}


@dataclass(frozen=True)
class SynthSpec:
    """Target shape of a generated corpus.

    counts: gold spans per category, realized exactly.
    nesting_rate: chance that a span is emitted as an outer span wrapping the
    next span in the queue.
    n_docs: document count; defaults to a size that spreads spans thinly.
    unique_surfaces: guarantee each gold surface occurs exactly once in its
    document, which makes text-to-offset grounding lossless.
    """

    counts: Mapping[Category, int] = field(default_factory=dict)
    nesting_rate: float = 0.0
    n_docs: int | None = None
    unique_surfaces: bool = False

    def validate(self) -> None:
        for category, count in self.counts.items():
            if not isinstance(category, Category):
                raise SynthSpecError(f"counts key {category!r} is not a category")
            if count < 0:
                raise SynthSpecError(f"count for {category.value} is negative: {count}")
        if not 0.0 <= self.nesting_rate <= 1.0:
            raise SynthSpecError(f"nesting_rate must be in [0, 1], got {self.nesting_rate}")
        total = sum(self.counts.values())
        if self.nesting_rate > 0 and total == 0:
            raise SynthSpecError("nesting requested but the span budget is zero")
        if self.n_docs is not None and self.n_docs < 1:
            raise SynthSpecError(f"n_docs must be >= 1, got {self.n_docs}")


def parse_synth_spec(data: Mapping) -> SynthSpec:
    """Build a SynthSpec from a plain JSON mapping (the CLI's --spec file)."""
    counts = {
        Category.parse(name): int(value) for name, value in data.get("counts", {}).items()
    }
    n_docs = data.get("n_docs")
    return SynthSpec(
        counts=counts,
        nesting_rate=float(data.get("nesting_rate", 0.0)),
        n_docs=None if n_docs is None else int(n_docs),
        unique_surfaces=bool(data.get("unique_surfaces", False)),
    )


class _DocBuilder:
    def __init__(self, doc_id: str, rng: random.Random, unique_surfaces: bool):
        self.doc_id = doc_id
        self.rng = rng
        self.unique = unique_surfaces
        self.parts: list[str] = []
        self.length = 0
        self.spans: list[Span] = []
        self.used_phrases: set[str] = set()

    def _append(self, piece: str) -> int:
        start = self.length
        self.parts.append(piece)
        self.length += len(piece)
        return start

    def filler(self, n_words: int) -> None:
        words = [self.rng.choice(FILLER_WORDS) for _ in range(n_words)]
        if self.parts:
            self._append(" ")
        self._append(" ".join(words))

    def _pick_phrase(self, category: Category, lexicon: Lexicon) -> str:
        choices = lexicon[category]
        if self.unique:
            fresh = [p for p in choices if p not in self.used_phrases]
            if not fresh:
                raise SynthSpecError(
                    f"lexicon for {category.value} exhausted while enforcing unique "
                    f"surfaces; lower per-document span counts or extend the lexicon"
                )
            choices = fresh
        phrase = self.rng.choice(choices)
        self.used_phrases.add(phrase)
        return phrase

    def plain_span(self, category: Category, lexicon: Lexicon) -> None:
        phrase = self._pick_phrase(category, lexicon)
        self._append(" ")
        start = self._append(phrase)
        self.spans.append(Span(start, start + len(phrase), category, phrase))

    def nested_span(self, outer: Category, inner: Category, lexicon: Lexicon) -> None:
        phrase = self._pick_phrase(inner, lexicon)
        prefix = NEST_PREFIXES[outer]
        self._append(" ")
        outer_start = self._append(prefix + phrase)
        inner_start = outer_start + len(prefix)
        self.spans.append(Span(outer_start, outer_start + len(prefix) + len(phrase), outer, prefix + phrase))
        self.spans.append(Span(inner_start, inner_start + len(phrase), inner, phrase))
        if self.unique:
            self.used_phrases.add(prefix + phrase)

    def finish(self) -> tuple[Document, AnnotationSet]:
        self._append(".")
        text = "".join(self.parts)
        serial = int(self.doc_id.rsplit("-", 1)[1])
        meta = DocumentMeta(
            participant=f"P{(serial - 1) % 7 + 1:02d}",
            session_kind=SessionKind.SELF_PRACTICE if serial % 2 else SessionKind.ZOOM_TRAINING,
            session_index=(serial - 1) // 7 + 1,
        )
        doc = Document(id=self.doc_id, text=text, meta=meta)
        spans = sorted(self.spans, key=lambda s: (s.start, s.end, s.category.value))
        if self.unique:
            for span in spans:
                occurrences = text.count(span.surface)
                if occurrences != 1:
                    raise SynthSpecError(
                        f"surface {span.surface!r} occurs {occurrences} times in "
                        f"{self.doc_id}; the lexicon is not containment-free"
                    )
        return doc, AnnotationSet(doc_id=self.doc_id, annotator_id=GOLD_ANNOTATOR, spans=spans)


def generate_synthetic_corpus(
    spec: SynthSpec, seed: int, lexicon: Lexicon | None = None
) -> Corpus:
    """Generate a corpus whose gold histogram equals `spec.counts` exactly."""
    spec.validate()
    if lexicon is None:
        lexicon = starter_lexicon()
    rng = random.Random(seed)

    queue: list[Category] = []
    for category in CATEGORIES:
        queue.extend([category] * spec.counts.get(category, 0))
    rng.shuffle(queue)

    total = len(queue)
    n_docs = spec.n_docs if spec.n_docs is not None else max(3, math.ceil(total / 8))

    buckets: list[list[Category]] = [[] for _ in range(n_docs)]
    for i, category in enumerate(queue):
        buckets[i % n_docs].append(category)

    documents: list[Document] = []
    annotations: list[AnnotationSet] = []
    for d, bucket in enumerate(buckets, start=1):
        builder = _DocBuilder(f"synth-{d:04d}", rng, spec.unique_surfaces)
        builder.filler(rng.randint(2, 4))
        pending = list(bucket)
        while pending:
            nest = len(pending) >= 2 and rng.random() < spec.nesting_rate
            if nest:
                outer = pending.pop(0)
                inner = pending.pop(0)
                builder.nested_span(outer, inner, lexicon)
            else:
                builder.plain_span(pending.pop(0), lexicon)
            builder.filler(rng.randint(1, 3))
        doc, aset = builder.finish()
        documents.append(doc)
        annotations.append(aset)
    return Corpus(documents=documents, annotations=annotations)
