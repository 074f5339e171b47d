"""Greedy decoding with a key-value cache.

Argmax at every step, so the completion for a given prompt is a pure
function of the adapter weights. That is what lets a temperature-0 request
produce byte-identical responses on repeat.
"""

from __future__ import annotations

import torch
from transformers import LlamaForCausalLM

from .tokenizer import BOS_ID, EOS_ID, CharTokenizer

#: Longest accepted prompt, in tokens; older context is dropped from the left.
MAX_PROMPT_TOKENS = 3800

DEFAULT_MAX_NEW_TOKENS = 256


def greedy_generate(
    model: LlamaForCausalLM,
    tokenizer: CharTokenizer,
    prompt: str,
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
) -> str:
    prompt_ids = [BOS_ID] + tokenizer.encode(prompt)[-MAX_PROMPT_TOKENS:]
    input_ids = torch.tensor([prompt_ids], dtype=torch.long)
    generated: list[int] = []
    with torch.no_grad():
        output = model(input_ids=input_ids, use_cache=True)
        for _ in range(max_new_tokens):
            next_id = int(output.logits[0, -1].argmax())
            if next_id == EOS_ID:
                break
            generated.append(next_id)
            output = model(
                input_ids=torch.tensor([[next_id]], dtype=torch.long),
                past_key_values=output.past_key_values,
                use_cache=True,
            )
    return tokenizer.decode(generated)
