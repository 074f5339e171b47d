"""Endpoint client, response parsing, and span grounding.

The client speaks the chat-completions wire shape: POST /v1/chat/completions
with a system message carrying the instruction and a user message carrying the
narrative. Model output is free text from which we salvage a JSON array, then
anchor each (category, text) item to character offsets in the source document.

Parsing never raises. A response we cannot use in any way becomes a
null-response marker; individually broken items are dropped and counted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import httpx

from .corpus import AnnotationSet, Category, Document, Span
from .errors import (
    ConfigError,
    CredentialError,
    ProtocolError,
    SchemaValidationError,
    TransportError,
)
from .prompting import ExemplarSet, PromptRecord, build_few_shot, build_zero_shot

log = logging.getLogger("cogspan.extraction")

API_KEY_VAR = "COGSPAN_API_KEY"
MODES = ("zero", "few")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 30.0
    max_concurrency: int = 4
    retry_backoff: float = 0.5

    def validate(self) -> None:
        if not self.base_url:
            raise ConfigError("base_url must be set")
        if not self.model_name:
            raise ConfigError("model_name must be set")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if self.retry_backoff < 0:
            raise ConfigError("retry_backoff must be >= 0")


@dataclass(frozen=True)
class ExtractionItem:
    category: Category
    text: str
    occurrence: int | None = None


@dataclass(frozen=True)
class ParsedOutput:
    """Outcome of reading one raw completion.

    `null_response` marks output with no usable array at all; an explicit
    empty array is a real (empty) answer, not a null response.
    """

    items: tuple[ExtractionItem, ...] = ()
    null_response: bool = False
    dropped: int = 0
    salvaged: bool = False


@dataclass(frozen=True)
class Provenance:
    model_name: str
    mode: str
    prompt_hash: str
    salvaged: bool = False
    dropped: int = 0
    error: str | None = None


@dataclass(frozen=True)
class GroundedResult:
    doc_id: str
    spans: tuple[Span, ...]
    ungrounded: tuple[ExtractionItem, ...]
    null_response: bool
    provenance: Provenance


def prompt_hash(prompt: PromptRecord) -> str:
    digest = hashlib.sha256(
        prompt.instruction.encode("utf-8") + b"\x00" + prompt.input.encode("utf-8")
    )
    return digest.hexdigest()[:16]


# ---------------------------------------------------------------------------
# wire client


def _post_once(client: httpx.Client, url: str, body: dict, headers: dict) -> httpx.Response:
    return client.post(url, json=body, headers=headers)


def call_endpoint(
    prompt: PromptRecord, config: EndpointConfig, client: httpx.Client | None = None
) -> str:
    """Return the first message content of the completion for `prompt`.

    Transport failures, 429 and 5xx responses are retried with exponential
    backoff up to max_retries. Authentication failures are terminal.
    """
    config.validate()
    url = config.base_url.rstrip("/") + "/v1/chat/completions"
    body = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": prompt.instruction},
            {"role": "user", "content": prompt.input},
        ],
        "temperature": config.temperature,
    }
    headers = {}
    api_key = os.environ.get(API_KEY_VAR)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=config.timeout)
    try:
        last_error: Exception | None = None
        for attempt in range(config.max_retries + 1):
            if attempt:
                wait = config.retry_backoff * (2 ** (attempt - 1))
                log.warning(
                    "retry %d/%d after %s (waiting %.2fs)",
                    attempt,
                    config.max_retries,
                    last_error,
                    wait,
                )
                time.sleep(wait)
            try:
                response = _post_once(client, url, body, headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise CredentialError(
                    f"endpoint rejected credentials (HTTP {response.status_code}); "
                    f"set {API_KEY_VAR} if the endpoint requires a key"
                )
            if response.status_code == 429 or response.status_code >= 500:
                last_error = TransportError(f"HTTP {response.status_code} from endpoint")
                continue
            if response.status_code != 200:
                raise ProtocolError(f"unexpected HTTP {response.status_code} from endpoint")
            try:
                payload = response.json()
            except ValueError as exc:
                raise ProtocolError("endpoint returned a non-JSON body") from exc
            try:
                content = payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProtocolError("completion payload missing choices[0].message.content") from exc
            if not isinstance(content, str):
                raise ProtocolError("completion content is not a string")
            return content
        raise TransportError(
            f"request failed after {config.max_retries + 1} attempts: {last_error}"
        )
    finally:
        if own_client:
            client.close()


# ---------------------------------------------------------------------------
# response parsing


def _normalize_category(value: str) -> Category | None:
    try:
        return Category(value.strip().lower().replace(" ", "_"))
    except ValueError:
        return None


def _coerce_items(raw_list: list) -> tuple[tuple[ExtractionItem, ...], int]:
    items: list[ExtractionItem] = []
    dropped = 0
    for element in raw_list:
        if (
            not isinstance(element, dict)
            or not isinstance(element.get("category"), str)
            or not isinstance(element.get("text"), str)
            or element["text"] == ""
        ):
            dropped += 1
            continue
        category = _normalize_category(element["category"])
        if category is None:
            dropped += 1
            continue
        occurrence = element.get("occurrence")
        if not isinstance(occurrence, int) or isinstance(occurrence, bool) or occurrence < 1:
            occurrence = None
        items.append(ExtractionItem(category=category, text=element["text"], occurrence=occurrence))
    return tuple(items), dropped


def _salvage_array(raw: str) -> list | None:
    """First balanced bracket block that parses as a JSON array, if any."""
    decoder = json.JSONDecoder()
    start = raw.find("[")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(raw, start)
        except ValueError:
            pass
        else:
            if isinstance(value, list):
                return value
        start = raw.find("[", start + 1)
    return None


def parse_model_output(raw: str) -> ParsedOutput:
    if not isinstance(raw, str) or not raw.strip():
        return ParsedOutput(null_response=True)
    salvaged = False
    try:
        value = json.loads(raw)
    except ValueError:
        value = None
    if not isinstance(value, list):
        value = _salvage_array(raw)
        if value is None:
            return ParsedOutput(null_response=True)
        salvaged = True
    items, dropped = _coerce_items(value)
    return ParsedOutput(items=items, dropped=dropped, salvaged=salvaged)


# ---------------------------------------------------------------------------
# grounding


def _occurrences(haystack: str, needle: str) -> list[int]:
    positions = []
    i = haystack.find(needle)
    while i != -1:
        positions.append(i)
        i = haystack.find(needle, i + 1)
    return positions


class _SurfaceIndex:
    """Occurrence lists per surface with positions consumed as items ground.

    Consumption is shared between case variants of the same surface so that a
    model emitting "Paris" and "paris" lands on two different occurrences.
    """

    def __init__(self, text: str):
        self._text = text
        lowered = text.lower()
        self._lowered = lowered if len(lowered) == len(text) else None
        self._exact: dict[str, list[int]] = {}
        self._ci: dict[str, list[int]] = {}
        self._used: dict[str, set[int]] = {}

    def _exact_positions(self, surface: str) -> list[int]:
        if surface not in self._exact:
            self._exact[surface] = _occurrences(self._text, surface)
        return self._exact[surface]

    def _ci_positions(self, surface: str) -> list[int]:
        key = surface.lower()
        if self._lowered is None or len(key) != len(surface):
            return []
        if key not in self._ci:
            self._ci[key] = _occurrences(self._lowered, key)
        return self._ci[key]

    def claim(self, surface: str, occurrence: int | None) -> int | None:
        used = self._used.setdefault(surface.lower(), set())
        for positions in (self._exact_positions(surface), self._ci_positions(surface)):
            if occurrence is not None:
                if occurrence <= len(positions):
                    start = positions[occurrence - 1]
                    used.add(start)
                    return start
                continue
            for start in positions:
                if start not in used:
                    used.add(start)
                    return start
        return None


def ground(
    items: Sequence[ExtractionItem],
    doc: Document,
    provenance: Provenance | None = None,
    null_response: bool = False,
) -> GroundedResult:
    """Anchor parsed items to offsets in `doc`, leftmost unused occurrence first.

    Case-sensitive matching is tried before a single case-insensitive retry.
    An explicit occurrence index picks that occurrence directly. Items whose
    text never appears are reported as ungrounded, in their original order.
    """
    if provenance is None:
        provenance = Provenance(model_name="", mode="zero", prompt_hash="")
    if null_response:
        return GroundedResult(
            doc_id=doc.id, spans=(), ungrounded=(), null_response=True, provenance=provenance
        )
    index = _SurfaceIndex(doc.text)
    spans: list[Span] = []
    ungrounded: list[ExtractionItem] = []
    for item in items:
        start = index.claim(item.text, item.occurrence)
        if start is None:
            ungrounded.append(item)
            continue
        end = start + len(item.text)
        spans.append(
            Span(start=start, end=end, category=item.category, surface=doc.text[start:end])
        )
    return GroundedResult(
        doc_id=doc.id,
        spans=tuple(spans),
        ungrounded=tuple(ungrounded),
        null_response=False,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# batch driver


def _build_prompt(doc: Document, mode: str, exemplars: ExemplarSet | None) -> PromptRecord:
    if mode == "few":
        assert exemplars is not None
        return build_few_shot(doc, exemplars)
    return build_zero_shot(doc)


def extract_batch(
    docs: Sequence[Document],
    mode: str,
    exemplars: ExemplarSet | None,
    config: EndpointConfig,
) -> list[GroundedResult]:
    """Run extraction over `docs`, one GroundedResult per document, in order.

    At most max_concurrency requests are in flight. A document whose request
    fails terminally yields a null-response result carrying the error text;
    one bad document never takes the batch down.
    """
    config.validate()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "few" and exemplars is None:
        raise ConfigError("few-shot mode requires an exemplar set")
    if not docs:
        return []

    prompts = [_build_prompt(doc, mode, exemplars) for doc in docs]

    def run_one(doc: Document, prompt: PromptRecord, client: httpx.Client) -> GroundedResult:
        base = Provenance(
            model_name=config.model_name, mode=mode, prompt_hash=prompt_hash(prompt)
        )
        try:
            raw = call_endpoint(prompt, config, client=client)
        except (TransportError, ProtocolError, CredentialError) as exc:
            log.warning("document %s failed: %s", doc.id, exc)
            return ground((), doc, provenance=replace(base, error=str(exc)), null_response=True)
        parsed = parse_model_output(raw)
        provenance = replace(base, salvaged=parsed.salvaged, dropped=parsed.dropped)
        return ground(
            parsed.items, doc, provenance=provenance, null_response=parsed.null_response
        )

    with httpx.Client(timeout=config.timeout) as client:
        if config.max_concurrency == 1:
            return [run_one(doc, prompt, client) for doc, prompt in zip(docs, prompts)]
        with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
            return list(pool.map(run_one, docs, prompts, [client] * len(docs)))


# ---------------------------------------------------------------------------
# predictions file


def _span_dict(span: Span) -> dict:
    return {
        "start": span.start,
        "end": span.end,
        "category": span.category.value,
        "surface": span.surface,
    }


def result_to_dict(result: GroundedResult) -> dict:
    prov = {
        "model_name": result.provenance.model_name,
        "mode": result.provenance.mode,
        "prompt_hash": result.provenance.prompt_hash,
        "salvaged": result.provenance.salvaged,
        "dropped": result.provenance.dropped,
    }
    if result.provenance.error is not None:
        prov["error"] = result.provenance.error
    out = {
        "doc_id": result.doc_id,
        "spans": [_span_dict(s) for s in result.spans],
        "ungrounded": [
            {
                "category": item.category.value,
                "text": item.text,
                **({"occurrence": item.occurrence} if item.occurrence is not None else {}),
            }
            for item in result.ungrounded
        ],
        "null_response": result.null_response,
        "provenance": prov,
    }
    return out


def serialize_predictions(results: Iterable[GroundedResult]) -> bytes:
    payload = {"predictions": [result_to_dict(r) for r in results]}
    return (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def parse_predictions(data: bytes | str) -> list[GroundedResult]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaValidationError(f"predictions file is not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("predictions"), list):
        raise SchemaValidationError('predictions file must be {"predictions": [...]}')
    results = []
    for i, rec in enumerate(payload["predictions"]):
        try:
            prov_raw = rec.get("provenance", {})
            provenance = Provenance(
                model_name=str(prov_raw.get("model_name", "")),
                mode=str(prov_raw.get("mode", "zero")),
                prompt_hash=str(prov_raw.get("prompt_hash", "")),
                salvaged=bool(prov_raw.get("salvaged", False)),
                dropped=int(prov_raw.get("dropped", 0)),
                error=prov_raw.get("error"),
            )
            spans = tuple(
                Span(
                    start=s["start"],
                    end=s["end"],
                    category=Category.parse(s["category"]),
                    surface=s["surface"],
                )
                for s in rec.get("spans", [])
            )
            ungrounded = tuple(
                ExtractionItem(
                    category=Category.parse(u["category"]),
                    text=u["text"],
                    occurrence=u.get("occurrence"),
                )
                for u in rec.get("ungrounded", [])
            )
            results.append(
                GroundedResult(
                    doc_id=str(rec["doc_id"]),
                    spans=spans,
                    ungrounded=ungrounded,
                    null_response=bool(rec.get("null_response", False)),
                    provenance=provenance,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaValidationError(f"predictions[{i}] is malformed: {exc}") from exc
    return results


def results_to_annotation_sets(
    results: Iterable[GroundedResult], annotator_id: str
) -> list[AnnotationSet]:
    """Predictions as AnnotationSets for the scorer; duplicate spans collapse."""
    sets = []
    for result in results:
        seen = set()
        spans = []
        for span in result.spans:
            if span.key() in seen:
                continue
            seen.add(span.key())
            spans.append(span)
        sets.append(AnnotationSet(doc_id=result.doc_id, annotator_id=annotator_id, spans=spans))
    return sets
