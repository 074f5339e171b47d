"""Instruction-tuning records: the JSONL line schema and the prompt template.

Each line is an object with string fields ``instruction``, ``input`` and
``output``. The prompt template concatenates instruction and input into the
text the model conditions on; the output (plus end-of-sequence) is what it
learns to emit. Training and serving share `format_prompt`, so a served
request that carries the same instruction and input reproduces the training
context exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

PROMPT_TEMPLATE = "### Instruction:\n{instruction}\n\n### Input:\n{input}\n\n### Response:\n"

_FIELDS = ("instruction", "input", "output")


@dataclass(frozen=True)
class SftRecord:
    instruction: str
    input: str
    output: str

    def prompt(self) -> str:
        return format_prompt(self.instruction, self.input)


def format_prompt(instruction: str, input_text: str) -> str:
    return PROMPT_TEMPLATE.format(instruction=instruction, input=input_text)


def parse_sft_lines(data: str) -> list[SftRecord]:
    records: list[SftRecord] = []
    for number, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {number}: not valid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise DataError(f"line {number}: expected an object, got {type(raw).__name__}")
        values = {}
        for field in _FIELDS:
            if field not in raw:
                raise DataError(f"line {number}: missing field {field!r}")
            if not isinstance(raw[field], str):
                raise DataError(f"line {number}: field {field!r} must be a string")
            values[field] = raw[field]
        records.append(SftRecord(**values))
    if not records:
        raise DataError("training file contains no records")
    return records


def read_sft_file(path: str | Path) -> list[SftRecord]:
    return parse_sft_lines(Path(path).read_text(encoding="utf-8"))


def data_sha256(path: str | Path) -> str:
    """Hash of the raw file bytes, recorded in the adapter manifest."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
