"""Exception types shared across the toolkit.

Everything raised on purpose derives from :class:`CogspanError` so the CLI
can catch one base class and emit a machine-readable error payload.
"""

from __future__ import annotations


class CogspanError(Exception):
    """Base class for all toolkit errors."""


class CorpusParseError(CogspanError):
    """Corpus file is not valid JSON. Carries the line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaValidationError(CogspanError):
    """A record in an input file violates the schema (unknown category, missing field)."""


class IntegrityError(CogspanError):
    """Span offsets or surfaces are inconsistent with the owning document."""


class InputError(CogspanError):
    """Two inputs that must agree (e.g. document coverage) do not."""


class UnknownAnnotatorError(CogspanError, LookupError):
    """Requested annotator id has no annotation sets in the corpus."""


class InfeasibleSplitError(CogspanError):
    """Fewer documents than non-empty splits requested."""


class PromptSchemaError(CogspanError):
    """Category schema or exemplar set does not cover the seven categories."""


class DataError(CogspanError):
    """Required data (e.g. gold annotations for a partition) is missing."""


class ConfigError(CogspanError):
    """Endpoint or generator configuration is invalid."""


class TransportError(CogspanError):
    """HTTP request failed after exhausting retries."""


class ProtocolError(CogspanError):
    """Endpoint answered, but not in the chat-completions shape we speak."""


class CredentialError(CogspanError):
    """Endpoint rejected our credentials; retrying would not help."""


class SynthSpecError(CogspanError):
    """Synthetic corpus request is internally impossible."""
