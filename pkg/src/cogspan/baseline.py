"""Deterministic lexicon tagger: a network-free floor baseline.

Patterns are literal phrases matched case-insensitively at word boundaries.
Within a category, longer patterns claim text first and occurrences never
overlap; across categories, overlap and nesting are allowed, matching the
annotation schema.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from typing import Iterable, Mapping

from .corpus import Category, Document, Span
from .errors import SchemaValidationError

Lexicon = dict[Category, list[str]]


def validate_lexicon(lexicon: Mapping[Category, Iterable[str]]) -> Lexicon:
    out: Lexicon = {}
    for category, patterns in lexicon.items():
        seen: set[str] = set()
        cleaned: list[str] = []
        for pattern in patterns:
            if not isinstance(pattern, str) or not pattern:
                raise SchemaValidationError(
                    f"lexicon[{category}]: patterns must be non-empty strings, got {pattern!r}"
                )
            if pattern in seen:
                raise SchemaValidationError(
                    f"lexicon[{category}]: pattern {pattern!r} listed twice"
                )
            seen.add(pattern)
            cleaned.append(pattern)
        out[category] = cleaned
    return out


def parse_lexicon(data: bytes | str) -> Lexicon:
    """Load a `{category: [phrase, ...]}` JSON file."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    raw = json.loads(data)
    if not isinstance(raw, dict):
        raise SchemaValidationError("lexicon file must be a JSON object")
    return validate_lexicon({Category.parse(name): phrases for name, phrases in raw.items()})


def starter_lexicon() -> Lexicon:
    """The lexicon asset shipped with the package."""
    data = resources.files("cogspan.data").joinpath("starter_lexicon.json").read_bytes()
    return parse_lexicon(data)


def _canonical_patterns(patterns: Iterable[str]) -> list[str]:
    # Longest first so multi-word phrases are not fragmented; declaration
    # order never matters.
    return sorted(patterns, key=lambda p: (-len(p), p.lower(), p))


def lexicon_tag(doc: Document, lexicon: Mapping[Category, Iterable[str]]) -> list[Span]:
    lexicon = validate_lexicon(lexicon)
    spans: list[Span] = []
    for category in Category:
        patterns = lexicon.get(category)
        if not patterns:
            continue
        claimed: list[tuple[int, int]] = []
        for pattern in _canonical_patterns(patterns):
            regex = re.compile(
                r"(?<!\w)" + re.escape(pattern) + r"(?!\w)", re.IGNORECASE
            )
            for m in regex.finditer(doc.text):
                if any(m.start() < e and s < m.end() for s, e in claimed):
                    continue
                claimed.append((m.start(), m.end()))
                spans.append(
                    Span(
                        start=m.start(),
                        end=m.end(),
                        category=category,
                        surface=doc.text[m.start():m.end()],
                    )
                )
    spans.sort(key=lambda s: (s.start, s.end, s.category.value))
    return spans
