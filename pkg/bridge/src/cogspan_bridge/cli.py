"""Command line entry points: train an adapter, serve an adapter."""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from .errors import BridgeError
from .serve import run_server
from .train import TrainConfig, train


def _fail(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Fine-tune small span-extraction models and serve them locally."""


_DEFAULTS = TrainConfig()


@main.command("train")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--base-model-id", default=_DEFAULTS.base_model_id, show_default=True)
@click.option("--rank", default=_DEFAULTS.lora_rank, show_default=True, type=int)
@click.option("--alpha", default=_DEFAULTS.lora_alpha, show_default=True, type=float)
@click.option("--dropout", default=_DEFAULTS.lora_dropout, show_default=True, type=float)
@click.option("--quantization", default=_DEFAULTS.quantization, show_default=True)
@click.option("--epochs", default=_DEFAULTS.epochs, show_default=True, type=int)
@click.option("--learning-rate", default=_DEFAULTS.learning_rate, show_default=True, type=float)
@click.option("--batch-size", default=_DEFAULTS.batch_size, show_default=True, type=int)
@click.option("--seed", default=_DEFAULTS.seed, show_default=True, type=int)
def train_command(data_path, out_dir, base_model_id, rank, alpha, dropout,
                  quantization, epochs, learning_rate, batch_size, seed):
    """Train adapters on an instruction JSONL file and write the artifact."""
    config = TrainConfig(
        base_model_id=base_model_id,
        lora_rank=rank,
        lora_alpha=alpha,
        lora_dropout=dropout,
        quantization=quantization,
        epochs=epochs,
        learning_rate=learning_rate,
        batch_size=batch_size,
        seed=seed,
    )
    try:
        out_path = train(data_path, config, out_dir)
    except (BridgeError, OSError) as exc:
        _fail(exc)
    click.echo(json.dumps({"adapter": str(out_path), "config": dataclasses.asdict(config)}))


@main.command("serve")
@click.option("--adapter", "adapter_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
def serve_command(adapter_dir, host, port):
    """Serve a trained adapter behind POST /v1/chat/completions."""
    try:
        run_server(adapter_dir, host=host, port=port)
    except (BridgeError, OSError) as exc:
        _fail(exc)
