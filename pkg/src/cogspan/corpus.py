"""Corpus data model: documents, nested spans, annotation sets, splits.

Offsets everywhere are character offsets counted in Unicode scalar values
(Python string indices), never bytes and never UTF-16 code units. The file
format is the JSON schema documented in the README; `parse_corpus` is the
strict loader and `validate_corpus` re-audits corpora that were built in
memory.
"""

from __future__ import annotations

import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    CorpusParseError,
    InfeasibleSplitError,
    InputError,
    IntegrityError,
    SchemaValidationError,
    UnknownAnnotatorError,
)

#: De-identification placeholders such as [PERSON] or [STREET]; a match is one
#: opaque token for statistics.
PLACEHOLDER_RE = re.compile(r"\[[A-Z]+\]")

GOLD_ANNOTATOR = "gold"


class Category(str, Enum):
    """The seven narrative categories, in canonical reporting order."""

    LOCATION = "location"
    TIME = "time"
    SENSORY = "sensory"
    ACTION = "action"
    THOUGHT = "thought"
    EMOTION = "emotion"
    SOCIAL_INTERACTION = "social_interaction"

    @classmethod
    def parse(cls, value: str) -> "Category":
        """Strictly parse a category name; anything but the seven values fails."""
        try:
            return cls(value)
        except ValueError:
            raise SchemaValidationError(f"unknown category: {value!r}") from None

    def __str__(self) -> str:  # json-friendly
        return self.value


CATEGORIES: tuple[Category, ...] = tuple(Category)


class SessionKind(str, Enum):
    ZOOM_TRAINING = "zoom_training"
    SELF_PRACTICE = "self_practice"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DocumentMeta:
    participant: str
    session_kind: SessionKind
    session_index: int


@dataclass(frozen=True)
class Document:
    """One de-identified narrative with session metadata."""

    id: str
    text: str
    meta: DocumentMeta

    def tokens(self) -> list[str]:
        """Whitespace tokens, with each [PLACEHOLDER] kept as a single token."""
        out: list[str] = []
        pos = 0
        for m in PLACEHOLDER_RE.finditer(self.text):
            out.extend(self.text[pos:m.start()].split())
            out.append(m.group(0))
            pos = m.end()
        out.extend(self.text[pos:].split())
        return out


@dataclass(frozen=True, order=True)
class Span:
    """A category-labeled character interval. Spans may nest or overlap freely."""

    start: int
    end: int
    category: Category
    surface: str

    def overlap(self, other: "Span") -> int:
        return max(0, min(self.end, other.end) - max(self.start, other.start))

    def key(self) -> tuple[int, int, Category]:
        return (self.start, self.end, self.category)


@dataclass(frozen=True)
class AnnotationSet:
    """One annotator's (or one model's) spans over one document."""

    doc_id: str
    annotator_id: str
    spans: tuple[Span, ...]

    def __init__(self, doc_id: str, annotator_id: str, spans: Iterable[Span] = ()):
        object.__setattr__(self, "doc_id", doc_id)
        object.__setattr__(self, "annotator_id", annotator_id)
        object.__setattr__(self, "spans", tuple(spans))


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    annotations: tuple[AnnotationSet, ...]

    def __init__(self, documents: Iterable[Document] = (), annotations: Iterable[AnnotationSet] = ()):
        object.__setattr__(self, "documents", tuple(documents))
        object.__setattr__(self, "annotations", tuple(annotations))

    def doc_by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)

    def annotator_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for aset in self.annotations:
            seen.setdefault(aset.annotator_id, None)
        return list(seen)

    def sets_for(self, annotator_id: str) -> list[AnnotationSet]:
        return [a for a in self.annotations if a.annotator_id == annotator_id]


@dataclass(frozen=True)
class Violation:
    """One invariant breach found by `validate_corpus`; data, not an exception."""

    doc_id: str
    rule: str
    value: str
    annotator_id: str | None = None


@dataclass(frozen=True)
class SplitAssignment:
    seed: int
    ratios: tuple[float, float, float]
    assignment: Mapping[str, str]  # doc_id -> "train" | "dev" | "test"

    def partition(self, name: str) -> list[str]:
        return [doc_id for doc_id, part in self.assignment.items() if part == name]


SPLIT_NAMES = ("train", "dev", "test")


# ---------------------------------------------------------------------------
# file format


def _require(record: Mapping, key: str, where: str):
    if key not in record:
        raise SchemaValidationError(f"{where}: missing field {key!r}")
    return record[key]


def _span_from_record(rec: Mapping, doc: Document, where: str) -> Span:
    start = _require(rec, "start", where)
    end = _require(rec, "end", where)
    if not isinstance(start, int) or not isinstance(end, int):
        raise SchemaValidationError(f"{where}: start/end must be integers")
    category = Category.parse(_require(rec, "category", where))
    if not (0 <= start < end <= len(doc.text)):
        raise IntegrityError(
            f"span [{start},{end}) out of range for document {doc.id!r} of length {len(doc.text)}"
        )
    slice_ = doc.text[start:end]
    surface = rec.get("surface")
    if surface is None:
        surface = slice_
    elif surface != slice_:
        raise IntegrityError(
            f"surface mismatch in document {doc.id!r} at [{start},{end}): "
            f"recorded {surface!r}, text reads {slice_!r}"
        )
    return Span(start=start, end=end, category=category, surface=surface)


def parse_corpus(data: bytes | str) -> Corpus:
    """Parse and fully validate a corpus file; the result satisfies every invariant.

    Raises `CorpusParseError` for broken JSON (with line position),
    `SchemaValidationError` for schema problems naming the offending record,
    and `IntegrityError` for offsets or surfaces that disagree with the text.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CorpusParseError(
            f"corpus file is not valid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}",
            line=exc.lineno,
            column=exc.colno,
        ) from exc
    if not isinstance(raw, dict):
        raise SchemaValidationError("corpus file must be a JSON object")

    documents: list[Document] = []
    by_id: dict[str, Document] = {}
    for i, rec in enumerate(raw.get("documents", [])):
        where = f"documents[{i}]"
        doc_id = _require(rec, "id", where)
        text = _require(rec, "text", where)
        if not isinstance(text, str) or len(text) < 1:
            raise SchemaValidationError(f"{where} (id={doc_id!r}): text must be a non-empty string")
        meta_rec = _require(rec, "meta", where)
        kind_raw = _require(meta_rec, "session_kind", f"{where}.meta")
        try:
            kind = SessionKind(kind_raw)
        except ValueError:
            raise SchemaValidationError(f"{where}.meta: unknown session_kind {kind_raw!r}") from None
        session_index = _require(meta_rec, "session_index", f"{where}.meta")
        if not isinstance(session_index, int) or session_index < 0:
            raise SchemaValidationError(f"{where}.meta: session_index must be a non-negative integer")
        meta = DocumentMeta(
            participant=str(_require(meta_rec, "participant", f"{where}.meta")),
            session_kind=kind,
            session_index=session_index,
        )
        if doc_id in by_id:
            raise SchemaValidationError(f"{where}: duplicate document id {doc_id!r}")
        doc = Document(id=doc_id, text=text, meta=meta)
        by_id[doc_id] = doc
        documents.append(doc)

    annotations: list[AnnotationSet] = []
    for i, rec in enumerate(raw.get("annotations", [])):
        where = f"annotations[{i}]"
        doc_id = _require(rec, "doc_id", where)
        if doc_id not in by_id:
            raise SchemaValidationError(f"{where}: doc_id {doc_id!r} references no document")
        annotator_id = str(_require(rec, "annotator_id", where))
        doc = by_id[doc_id]
        spans = []
        seen_keys: set[tuple[int, int, Category]] = set()
        for j, span_rec in enumerate(rec.get("spans", [])):
            span = _span_from_record(span_rec, doc, f"{where}.spans[{j}]")
            if span.key() in seen_keys:
                raise SchemaValidationError(
                    f"{where}.spans[{j}]: duplicate span "
                    f"({span.start},{span.end},{span.category}) in document {doc_id!r}"
                )
            seen_keys.add(span.key())
            spans.append(span)
        annotations.append(AnnotationSet(doc_id=doc_id, annotator_id=annotator_id, spans=spans))

    return Corpus(documents=documents, annotations=annotations)


def corpus_to_dict(corpus: Corpus) -> dict:
    return {
        "documents": [
            {
                "id": d.id,
                "text": d.text,
                "meta": {
                    "participant": d.meta.participant,
                    "session_kind": d.meta.session_kind.value,
                    "session_index": d.meta.session_index,
                },
            }
            for d in corpus.documents
        ],
        "annotations": [
            {
                "doc_id": a.doc_id,
                "annotator_id": a.annotator_id,
                "spans": [
                    {"start": s.start, "end": s.end, "category": s.category.value, "surface": s.surface}
                    for s in a.spans
                ],
            }
            for a in corpus.annotations
        ],
    }


def serialize_corpus(corpus: Corpus) -> bytes:
    """Canonical bytes for a corpus; equal corpora serialize identically."""
    return (json.dumps(corpus_to_dict(corpus), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# validation


def validate_corpus(corpus: Corpus) -> list[Violation]:
    """Audit every type invariant; returns [] iff the corpus is clean.

    Unlike `parse_corpus`, this never raises: a corpus assembled in memory may
    break invariants, and each breach comes back as a `Violation` record.
    """
    violations: list[Violation] = []
    by_id: dict[str, Document] = {}
    for doc in corpus.documents:
        if doc.id in by_id:
            violations.append(Violation(doc.id, "duplicate document id", doc.id))
        else:
            by_id[doc.id] = doc
        if len(doc.text) < 1:
            violations.append(Violation(doc.id, "empty text", repr(doc.text)))
        if doc.meta.session_index < 0:
            violations.append(Violation(doc.id, "negative session_index", str(doc.meta.session_index)))

    for aset in corpus.annotations:
        doc = by_id.get(aset.doc_id)
        if doc is None:
            violations.append(
                Violation(aset.doc_id, "unknown doc reference", aset.doc_id, aset.annotator_id)
            )
            continue
        seen: set[tuple[int, int, Category]] = set()
        for span in aset.spans:
            where = f"({span.start},{span.end},{span.category})"
            if not (0 <= span.start < span.end <= len(doc.text)):
                violations.append(
                    Violation(aset.doc_id, "offset out of range", where, aset.annotator_id)
                )
                continue
            if span.surface != doc.text[span.start:span.end]:
                violations.append(
                    Violation(
                        aset.doc_id,
                        "surface mismatch",
                        f"{where} recorded {span.surface!r}, text reads "
                        f"{doc.text[span.start:span.end]!r}",
                        aset.annotator_id,
                    )
                )
            if span.key() in seen:
                violations.append(Violation(aset.doc_id, "duplicate span", where, aset.annotator_id))
            seen.add(span.key())
    return violations


# ---------------------------------------------------------------------------
# statistics


def category_histogram(corpus: Corpus, annotator_id: str) -> dict[Category, int]:
    """Span counts per category across all of one annotator's sets.

    All seven categories appear in the result, zeros included.
    """
    sets = corpus.sets_for(annotator_id)
    if not sets:
        raise UnknownAnnotatorError(f"no annotations for annotator {annotator_id!r}")
    counts: Counter[Category] = Counter()
    for aset in sets:
        counts.update(span.category for span in aset.spans)
    return {cat: counts.get(cat, 0) for cat in CATEGORIES}


def _doc_category_counts(corpus: Corpus, annotator_id: str) -> dict[str, Counter]:
    per_doc: dict[str, Counter] = {doc.id: Counter() for doc in corpus.documents}
    for aset in corpus.sets_for(annotator_id):
        if aset.doc_id in per_doc:
            per_doc[aset.doc_id].update(span.category for span in aset.spans)
    return per_doc


def _size_caps(n: int, ratios: Sequence[float]) -> list[int]:
    # Largest-remainder apportionment: caps sum to n, each within 1 of ratio*n.
    quotas = [r * n for r in ratios]
    caps = [math.floor(q) for q in quotas]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - caps[i]), i)
    )
    for i in remainders[: n - sum(caps)]:
        caps[i] += 1
    return caps


def stratified_split(
    corpus: Corpus,
    ratios: tuple[float, float, float],
    seed: int,
    annotator_id: str = GOLD_ANNOTATOR,
) -> SplitAssignment:
    """Deterministic document-level split that keeps each split's category mix
    close to the corpus-wide mix.

    Documents are shuffled with the seed, then each is assigned greedily to
    the split (train/dev/test, capacity-capped to the ratio sizes) where it
    least worsens the maximum absolute deviation between any split's category
    proportions and the global proportions.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InputError(f"ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise InputError(f"ratios must be non-negative, got {ratios}")
    if not corpus.sets_for(annotator_id):
        raise UnknownAnnotatorError(f"no annotations for annotator {annotator_id!r}")

    n = len(corpus.documents)
    nonzero = sum(1 for r in ratios if r > 0)
    if n < nonzero:
        raise InfeasibleSplitError(f"{n} documents cannot fill {nonzero} non-empty splits")

    caps = _size_caps(n, ratios)
    per_doc = _doc_category_counts(corpus, annotator_id)

    global_counts: Counter = Counter()
    for c in per_doc.values():
        global_counts.update(c)
    global_total = sum(global_counts.values())
    global_prop = {
        cat: (global_counts.get(cat, 0) / global_total if global_total else 0.0)
        for cat in CATEGORIES
    }

    order = sorted(doc.id for doc in corpus.documents)
    random.Random(seed).shuffle(order)

    split_counts: list[Counter] = [Counter(), Counter(), Counter()]
    split_totals = [0, 0, 0]
    split_sizes = [0, 0, 0]
    assignment: dict[str, str] = {}

    def deviation(counts: Counter, total: int) -> float:
        if total == 0:
            return 0.0
        return max(abs(counts.get(cat, 0) / total - global_prop[cat]) for cat in CATEGORIES)

    for doc_id in order:
        doc_counts = per_doc[doc_id]
        doc_total = sum(doc_counts.values())
        best: tuple[float, float, int] | None = None
        for s in range(3):
            if split_sizes[s] >= caps[s]:
                continue
            candidate = split_counts[s] + doc_counts
            cand_dev = max(
                deviation(candidate, split_totals[s] + doc_total),
                *(deviation(split_counts[t], split_totals[t]) for t in range(3) if t != s),
            )
            # Tie-break: most spare capacity left (relative), then split order.
            spare = (caps[s] - split_sizes[s]) / caps[s] if caps[s] else 0.0
            key = (cand_dev, -spare, s)
            if best is None or key < best:
                best = key
        assert best is not None  # caps sum to n, so some split has room
        s = best[2]
        split_counts[s].update(doc_counts)
        split_totals[s] += doc_total
        split_sizes[s] += 1
        assignment[doc_id] = SPLIT_NAMES[s]

    ordered = {doc.id: assignment[doc.id] for doc in corpus.documents}
    return SplitAssignment(seed=seed, ratios=tuple(ratios), assignment=ordered)


# ---------------------------------------------------------------------------
# split file format


def split_to_dict(split: SplitAssignment) -> dict:
    return {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "assignment": dict(split.assignment),
    }


def serialize_split(split: SplitAssignment) -> bytes:
    return (json.dumps(split_to_dict(split), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def parse_split(data: bytes | str) -> SplitAssignment:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CorpusParseError(
            f"split file is not valid JSON: {exc.msg} at line {exc.lineno}", line=exc.lineno
        ) from exc
    ratios = raw.get("ratios")
    if not (isinstance(ratios, list) and len(ratios) == 3):
        raise SchemaValidationError("split file: ratios must be a list of three numbers")
    assignment = raw.get("assignment")
    if not isinstance(assignment, dict):
        raise SchemaValidationError("split file: assignment must be an object")
    for doc_id, part in assignment.items():
        if part not in SPLIT_NAMES:
            raise SchemaValidationError(f"split file: {doc_id!r} assigned to unknown split {part!r}")
    return SplitAssignment(
        seed=int(raw.get("seed", 0)),
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
        assignment=dict(assignment),
    )
