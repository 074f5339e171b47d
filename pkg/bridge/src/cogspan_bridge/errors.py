"""Exception types for the bridge; all deliberate failures derive from BridgeError."""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for bridge errors."""


class DataError(BridgeError):
    """Training file is empty or a line violates the record schema."""


class ConfigError(BridgeError):
    """Training configuration is invalid or names an unknown base model."""


class AdapterError(BridgeError):
    """Adapter directory is missing pieces or its manifest is inconsistent."""


class ResourceError(BridgeError):
    """Hardware ran out of memory; carries guidance on shrinking the run."""


class StartupError(BridgeError):
    """Server could not start, e.g. the port is already taken."""
