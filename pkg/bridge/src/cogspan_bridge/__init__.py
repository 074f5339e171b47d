"""Adapter fine-tuning and local serving for span extraction models.

Consumes instruction JSONL produced by the extraction toolkit's export,
trains low-rank adapters over a small locally-built base model, and serves
the result behind the same chat-completions endpoint the toolkit's client
already speaks. The two packages share only those two interfaces: the file
format and the wire protocol.
"""

from .errors import (
    AdapterError,
    BridgeError,
    ConfigError,
    DataError,
    ResourceError,
    StartupError,
)
from .generate import greedy_generate
from .sft import SftRecord, format_prompt, parse_sft_lines, read_sft_file
from .serve import create_app, run_server
from .tokenizer import CharTokenizer
from .train import TrainConfig, load_adapter, read_manifest, train

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "BridgeError",
    "CharTokenizer",
    "ConfigError",
    "DataError",
    "ResourceError",
    "SftRecord",
    "StartupError",
    "TrainConfig",
    "create_app",
    "format_prompt",
    "greedy_generate",
    "load_adapter",
    "parse_sft_lines",
    "read_manifest",
    "read_sft_file",
    "run_server",
    "train",
    "__version__",
]
