"""Adapter training on instruction JSONL, producing a self-contained artifact.

The artifact directory holds three files: ``adapter.pt`` (the trained
tensors), ``tokenizer.json`` (the character alphabet), and ``manifest.json``
(base id, adapter shape, quantization, seed, and the SHA-256 of the training
file). Given the same inputs, the manifest is byte-identical across runs.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import AdapterError, ConfigError, ResourceError
from .model import (
    BASE_REGISTRY,
    QUANTIZATION_MODES,
    adapter_state_dict,
    attach_lora_,
    build_base,
    load_adapter_state_,
    quantize_base_,
    trainable_parameters,
)
from .sft import SftRecord, data_sha256, read_sft_file
from .tokenizer import BOS_ID, EOS_ID, PAD_ID, CharTokenizer

MANIFEST_NAME = "manifest.json"
ADAPTER_NAME = "adapter.pt"
TOKENIZER_NAME = "tokenizer.json"

#: Label value ignored by the loss; prompt positions are masked with it.
IGNORE_INDEX = -100


@dataclass(frozen=True)
class TrainConfig:
    base_model_id: str = "local/llama-mini-64x4"
    lora_rank: int = 16
    lora_alpha: float = 64
    lora_dropout: float = 0.05
    quantization: str = "4-bit"
    epochs: int = 400
    learning_rate: float = 3e-3
    batch_size: int = 32
    seed: int = 1234

    def validate(self) -> None:
        if self.base_model_id not in BASE_REGISTRY:
            known = ", ".join(sorted(BASE_REGISTRY))
            raise ConfigError(f"unknown base model {self.base_model_id!r} (known: {known})")
        if self.lora_rank < 1:
            raise ConfigError(f"lora_rank must be >= 1, got {self.lora_rank}")
        if self.lora_alpha <= 0:
            raise ConfigError(f"lora_alpha must be positive, got {self.lora_alpha}")
        if not 0.0 <= self.lora_dropout < 1.0:
            raise ConfigError(f"lora_dropout must be in [0, 1), got {self.lora_dropout}")
        if self.quantization not in QUANTIZATION_MODES:
            modes = ", ".join(QUANTIZATION_MODES)
            raise ConfigError(f"quantization must be one of {modes}, got {self.quantization!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


def _manifest(config: TrainConfig, data_hash: str) -> dict:
    return {
        "base_model_id": config.base_model_id,
        "lora_rank": config.lora_rank,
        "lora_alpha": config.lora_alpha,
        "lora_dropout": config.lora_dropout,
        "quantization": config.quantization,
        "seed": config.seed,
        "data_sha256": data_hash,
        "training": {
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
        },
    }


def _encode_examples(records: list[SftRecord], tokenizer: CharTokenizer):
    examples = []
    for record in records:
        prompt_ids = tokenizer.encode(record.prompt())
        target_ids = tokenizer.encode(record.output) + [EOS_ID]
        ids = [BOS_ID] + prompt_ids + target_ids
        labels = [IGNORE_INDEX] * (1 + len(prompt_ids)) + target_ids
        examples.append((ids, labels))
    return examples


def _batch_tensors(batch):
    width = max(len(ids) for ids, _ in batch)
    input_ids = torch.full((len(batch), width), PAD_ID, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    attention = torch.zeros((len(batch), width), dtype=torch.long)
    for row, (ids, labs) in enumerate(batch):
        input_ids[row, : len(ids)] = torch.tensor(ids)
        labels[row, : len(labs)] = torch.tensor(labs)
        attention[row, : len(ids)] = 1
    return input_ids, labels, attention


def _out_of_memory(exc: RuntimeError) -> bool:
    return "out of memory" in str(exc).lower()


def train(sft_file: str | Path, config: TrainConfig, out_dir: str | Path) -> Path:
    """Fit adapters to the training file and write the artifact directory.

    The base is built from the registry, optionally quantized, and frozen;
    only the low-rank residuals and the tied token embedding learn. The
    learning rate steps down to 1/3 at 50% of the epochs and to 1/15 at 80%,
    which settles the tail of the run.
    """
    config.validate()
    records = read_sft_file(sft_file)

    tokenizer = CharTokenizer.from_texts(
        [record.prompt() for record in records] + [record.output for record in records]
    )
    model = build_base(config.base_model_id, tokenizer.vocab_size)
    if config.quantization == "4-bit":
        quantize_base_(model)

    torch.manual_seed(config.seed)
    attach_lora_(model, config.lora_rank, config.lora_alpha, config.lora_dropout)
    params = trainable_parameters(model)

    examples = _encode_examples(records, tokenizer)
    optimizer = torch.optim.AdamW(params, lr=config.learning_rate, weight_decay=0.0)
    loss_fn = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)
    shuffler = random.Random(config.seed)
    vocab = tokenizer.vocab_size

    model.train()
    try:
        for epoch in range(config.epochs):
            if epoch == int(config.epochs * 0.5):
                for group in optimizer.param_groups:
                    group["lr"] = config.learning_rate / 3
            if epoch == int(config.epochs * 0.8):
                for group in optimizer.param_groups:
                    group["lr"] = config.learning_rate / 15
            order = list(range(len(examples)))
            shuffler.shuffle(order)
            for offset in range(0, len(order), config.batch_size):
                batch = [examples[i] for i in order[offset : offset + config.batch_size]]
                input_ids, labels, attention = _batch_tensors(batch)
                output = model(input_ids=input_ids, attention_mask=attention)
                loss = loss_fn(
                    output.logits[:, :-1].reshape(-1, vocab), labels[:, 1:].reshape(-1)
                )
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
    except RuntimeError as exc:
        if _out_of_memory(exc):
            raise ResourceError(
                "ran out of memory while training; lower batch_size, shorten the "
                "records, or pick a smaller base model"
            ) from exc
        raise

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state_dict(model), out_path / ADAPTER_NAME)
    tokenizer.save(out_path / TOKENIZER_NAME)
    manifest = _manifest(config, data_sha256(sft_file))
    (out_path / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_path


def read_manifest(adapter_dir: str | Path) -> dict:
    path = Path(adapter_dir) / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AdapterError(f"cannot read manifest at {path}: {exc}") from exc
    required = (
        "base_model_id",
        "lora_rank",
        "lora_alpha",
        "lora_dropout",
        "quantization",
        "seed",
        "data_sha256",
    )
    missing = [key for key in required if key not in manifest]
    if missing:
        raise AdapterError(f"manifest at {path} is missing fields: {missing}")
    return manifest


def load_adapter(adapter_dir: str | Path):
    """Rebuild the frozen base and load trained tensors; returns (model, tokenizer, manifest)."""
    adapter_path = Path(adapter_dir)
    manifest = read_manifest(adapter_path)
    tokenizer = CharTokenizer.load(adapter_path / TOKENIZER_NAME)
    model = build_base(manifest["base_model_id"], tokenizer.vocab_size)
    if manifest["quantization"] == "4-bit":
        quantize_base_(model)
    attach_lora_(
        model, manifest["lora_rank"], manifest["lora_alpha"], manifest["lora_dropout"]
    )
    weights_path = adapter_path / ADAPTER_NAME
    try:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError) as exc:
        raise AdapterError(f"cannot read adapter weights at {weights_path}: {exc}") from exc
    load_adapter_state_(model, state)
    model.eval()
    return model, tokenizer, manifest
