"""Base model construction, weight quantization, and low-rank adapters.

The base is a small Llama-architecture decoder built locally from a registry
of named configurations and a fixed init seed, so the same `base_model_id`
always denotes the same weights without downloading anything. Training
freezes the (optionally 4-bit quantized) base and learns rank-r adapters on
every linear projection plus the tied token embedding; exactly those tensors
form the adapter artifact.
"""

from __future__ import annotations

import math
from typing import Mapping

import torch
from torch import nn
from transformers import LlamaConfig, LlamaForCausalLM

from .errors import AdapterError, ConfigError

#: Named base configurations; values are LlamaConfig keyword arguments.
BASE_REGISTRY: Mapping[str, dict] = {
    "local/llama-mini-64x4": dict(
        hidden_size=64,
        intermediate_size=192,
        num_hidden_layers=4,
        num_attention_heads=4,
        num_key_value_heads=4,
        max_position_embeddings=4096,
    ),
    "local/llama-micro-32x2": dict(
        hidden_size=32,
        intermediate_size=96,
        num_hidden_layers=2,
        num_attention_heads=2,
        num_key_value_heads=2,
        max_position_embeddings=4096,
    ),
}

#: Init seed baked into every registry base. Serving rebuilds the base from
#: this constant, so it must never depend on the training seed.
BASE_INIT_SEED = 510510

#: Linear projections that receive adapters (attention and MLP alike).
LORA_TARGETS = ("q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj")

QUANTIZATION_MODES = ("4-bit", "none")


def build_base(base_model_id: str, vocab_size: int) -> LlamaForCausalLM:
    if base_model_id not in BASE_REGISTRY:
        known = ", ".join(sorted(BASE_REGISTRY))
        raise ConfigError(f"unknown base model {base_model_id!r} (known: {known})")
    config = LlamaConfig(
        vocab_size=vocab_size,
        tie_word_embeddings=True,
        pad_token_id=0,
        bos_token_id=1,
        eos_token_id=2,
        **BASE_REGISTRY[base_model_id],
    )
    generator_state = torch.random.get_rng_state()
    try:
        torch.manual_seed(BASE_INIT_SEED)
        model = LlamaForCausalLM(config)
    finally:
        torch.random.set_rng_state(generator_state)
    return model


def quantize_base_(model: LlamaForCausalLM) -> None:
    """Constrain every decoder-layer linear weight to 4-bit precision in place.

    Round-to-nearest against a per-output-channel absmax scale: 16 levels per
    row, stored dequantized so the forward pass stays plain float matmul.
    Embeddings and the tied head are left at full precision.
    """
    with torch.no_grad():
        for layer in model.model.layers:
            for module in layer.modules():
                if isinstance(module, nn.Linear):
                    w = module.weight
                    scale = w.abs().amax(dim=1, keepdim=True).clamp(min=1e-8) / 7.0
                    w.copy_((w / scale).round().clamp(-8, 7) * scale)


class LoRALinear(nn.Module):
    """A frozen linear layer plus a trainable low-rank residual.

    forward(x) = base(x) + (alpha / r) * B(A(dropout(x))), with A initialized
    kaiming-uniform and B zero so the wrapped layer starts exactly equal to
    the base.
    """

    def __init__(self, base: nn.Linear, rank: int, alpha: float, dropout: float):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        self.lora_A = nn.Linear(base.in_features, rank, bias=False)
        self.lora_B = nn.Linear(rank, base.out_features, bias=False)
        nn.init.kaiming_uniform_(self.lora_A.weight, a=math.sqrt(5))
        nn.init.zeros_(self.lora_B.weight)
        self.scaling = alpha / rank
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * self.lora_B(self.lora_A(self.dropout(x)))


def attach_lora_(model: LlamaForCausalLM, rank: int, alpha: float, dropout: float) -> int:
    """Wrap every target projection with a LoRALinear; returns how many."""
    wrapped = 0
    for layer in model.model.layers:
        for holder in (layer.self_attn, layer.mlp):
            for name in LORA_TARGETS:
                if hasattr(holder, name):
                    setattr(holder, name, LoRALinear(getattr(holder, name), rank, alpha, dropout))
                    wrapped += 1
    return wrapped


def trainable_parameters(model: LlamaForCausalLM) -> list[torch.nn.Parameter]:
    """Freeze the model, then re-enable adapters and the tied embedding."""
    for param in model.parameters():
        param.requires_grad_(False)
    params: list[torch.nn.Parameter] = []
    for module in model.modules():
        if isinstance(module, LoRALinear):
            for param in (module.lora_A.weight, module.lora_B.weight):
                param.requires_grad_(True)
                params.append(param)
    embedding = model.get_input_embeddings().weight
    embedding.requires_grad_(True)
    params.append(embedding)
    return params


def adapter_state_dict(model: LlamaForCausalLM) -> dict[str, torch.Tensor]:
    state = {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_A" in name or "lora_B" in name
    }
    state["model.embed_tokens.weight"] = model.state_dict()["model.embed_tokens.weight"]
    return state


def load_adapter_state_(model: LlamaForCausalLM, state: Mapping[str, torch.Tensor]) -> None:
    missing, unexpected = model.load_state_dict(dict(state), strict=False)
    if unexpected:
        raise AdapterError(f"adapter state holds unknown tensors: {sorted(unexpected)[:3]}")
    leftover = [name for name in missing if "lora_A" in name or "lora_B" in name]
    if leftover:
        raise AdapterError(f"adapter state is missing tensors: {leftover[:3]}")
