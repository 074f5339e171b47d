"""Prompt construction and instruction-tuning export.

Responses deliberately carry category and text only, no offsets: that is the
shape models actually produce, and it forces every prediction through the
grounding step. All builders are pure and deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .corpus import CATEGORIES, Category, Corpus, Document, Span, SplitAssignment
from .errors import DataError, PromptSchemaError, SchemaValidationError

CategorySchema = Mapping[Category, str]

#: Working definitions of the seven categories, rendered into every prompt.
DEFAULT_SCHEMA: CategorySchema = {
    Category.LOCATION: (
        "Places or settings where events unfold, from named sites and streets "
        "to general descriptions of where things are."
    ),
    Category.TIME: (
        "When something happens: clock references, days, dates, months, "
        "seasons, holidays, or other temporal anchors."
    ),
    Category.SENSORY: (
        "Perception through sight, hearing, smell, taste, or touch, including "
        "temperature, pressure, and pain, plus awareness of body position and "
        "internal states such as hunger or heartbeat."
    ),
    Category.ACTION: (
        "Purposeful physical or mental acts carried out by the narrator or by others."
    ),
    Category.THOUGHT: (
        "Internal reflection and processing, such as deciding, realizing, "
        "recalling, or interpreting, whether or not it leads to a concrete act."
    ),
    Category.EMOTION: (
        "Feelings the narrator or others experience, positive or negative."
    ),
    Category.SOCIAL_INTERACTION: (
        "Verbal or non-verbal exchanges between people, including "
        "conversations, gestures, and shared moments."
    ),
}


@dataclass(frozen=True)
class PromptRecord:
    instruction: str
    input: str
    response: str | None = None


@dataclass(frozen=True)
class Exemplar:
    """One worked example: a narrative and its expected (category, text) items."""

    input: str
    items: tuple[tuple[Category, str], ...]

    def response_json(self) -> str:
        return json.dumps(
            [{"category": c.value, "text": t} for c, t in self.items], ensure_ascii=False
        )


@dataclass(frozen=True)
class ExemplarSet:
    exemplars: tuple[Exemplar, ...]

    def __init__(self, exemplars: Iterable[Exemplar]):
        exemplars = tuple(exemplars)
        if len(exemplars) != 5:
            raise PromptSchemaError(f"an exemplar set holds exactly 5 examples, got {len(exemplars)}")
        covered = {c for ex in exemplars for c, _ in ex.items}
        missing = [c.value for c in CATEGORIES if c not in covered]
        if missing:
            raise PromptSchemaError(f"exemplars must collectively cover all categories; missing {missing}")
        object.__setattr__(self, "exemplars", exemplars)


def parse_exemplars(data: bytes | str) -> ExemplarSet:
    """Load an exemplar file: a JSON array of {input, response:[{category,text}]}."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    raw = json.loads(data)
    if not isinstance(raw, list):
        raise SchemaValidationError("exemplar file must be a JSON array")
    exemplars = []
    for i, rec in enumerate(raw):
        items = tuple(
            (Category.parse(item["category"]), str(item["text"]))
            for item in rec.get("response", [])
        )
        exemplars.append(Exemplar(input=str(rec["input"]), items=items))
    return ExemplarSet(exemplars)


def default_exemplars() -> ExemplarSet:
    data = resources.files("cogspan.data").joinpath("default_exemplars.json").read_bytes()
    return parse_exemplars(data)


def load_template() -> str:
    return resources.files("cogspan.data").joinpath("prompt_template_v1.txt").read_text("utf-8")


def _definitions_block(schema: CategorySchema) -> str:
    missing = [c.value for c in CATEGORIES if not schema.get(c)]
    if missing:
        raise PromptSchemaError(f"category schema missing definitions for {missing}")
    return "\n".join(f"- {c.value}: {schema[c]}" for c in CATEGORIES)


def _instruction(schema: CategorySchema, examples_block: str) -> str:
    filled = load_template().replace("{{definitions}}", _definitions_block(schema))
    filled = filled.replace("{{examples}}", examples_block)
    return filled.split("{{input}}")[0]


def build_zero_shot(doc: Document, schema: CategorySchema = DEFAULT_SCHEMA) -> PromptRecord:
    """Task instructions and definitions only, no worked examples."""
    return PromptRecord(instruction=_instruction(schema, ""), input=doc.text)


def build_few_shot(
    doc: Document, exemplars: ExemplarSet, schema: CategorySchema = DEFAULT_SCHEMA
) -> PromptRecord:
    """Zero-shot instructions followed by the five exemplars, in declared order."""
    blocks = []
    for k, ex in enumerate(exemplars.exemplars, start=1):
        blocks.append(f"Example {k}:\nNarrative:\n{ex.input}\nOutput:\n{ex.response_json()}\n\n")
    return PromptRecord(instruction=_instruction(schema, "".join(blocks)), input=doc.text)


# ---------------------------------------------------------------------------
# instruction-tuning export


def _response_json(spans: Sequence[Span]) -> str:
    ordered = sorted(spans, key=lambda s: (s.start, s.end, s.category.value))
    return json.dumps(
        [{"category": s.category.value, "text": s.surface} for s in ordered],
        ensure_ascii=False,
    )


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Offsets of sentences split on terminal punctuation followed by whitespace."""
    sentences: list[tuple[int, int]] = []
    n = len(text)
    i = 0
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        end = None
        while i < n:
            if text[i] in ".!?":
                while i < n and text[i] in ".!?":
                    i += 1
                if i >= n or text[i].isspace():
                    end = i
                    break
            else:
                i += 1
        if end is None:
            end = n
        sentences.append((start, end))
    return sentences


def export_sft(
    corpus: Corpus,
    split: SplitAssignment,
    partition: str,
    annotator_id: str = "gold",
    schema: CategorySchema = DEFAULT_SCHEMA,
    sentence_level: bool = False,
) -> list[PromptRecord]:
    """One instruction/input/response record per partition document.

    With `sentence_level`, each sentence becomes its own record and only the
    spans fully inside it are exported; spans straddling a sentence boundary
    are left out of the export.
    """
    instruction = _instruction(schema, "")
    gold_by_doc: dict[str, list[Span]] = {}
    for aset in corpus.sets_for(annotator_id):
        gold_by_doc.setdefault(aset.doc_id, []).extend(aset.spans)

    wanted = [doc for doc in corpus.documents if split.assignment.get(doc.id) == partition]
    missing = [doc.id for doc in wanted if doc.id not in gold_by_doc]
    if missing:
        raise DataError(
            f"no {annotator_id!r} annotations for partition {partition!r} documents: {missing}"
        )

    records: list[PromptRecord] = []
    for doc in wanted:
        spans = gold_by_doc[doc.id]
        if not sentence_level:
            records.append(
                PromptRecord(instruction=instruction, input=doc.text, response=_response_json(spans))
            )
            continue
        for start, end in split_sentences(doc.text):
            inside = [s for s in spans if start <= s.start and s.end <= end]
            records.append(
                PromptRecord(
                    instruction=instruction,
                    input=doc.text[start:end],
                    response=_response_json(inside),
                )
            )
    return records


def records_to_jsonl(records: Iterable[PromptRecord]) -> bytes:
    lines = []
    for rec in records:
        lines.append(
            json.dumps(
                {"instruction": rec.instruction, "input": rec.input, "output": rec.response or ""},
                ensure_ascii=False,
            )
        )
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def parse_jsonl_records(data: bytes | str) -> list[PromptRecord]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for line_no, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaValidationError(f"line {line_no}: not valid JSON ({exc.msg})") from exc
        for key in ("instruction", "input", "output"):
            if key not in raw:
                raise SchemaValidationError(f"line {line_no}: missing field {key!r}")
        records.append(
            PromptRecord(
                instruction=raw["instruction"], input=raw["input"], response=raw["output"]
            )
        )
    return records
