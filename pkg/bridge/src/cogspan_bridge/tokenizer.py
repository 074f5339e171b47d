"""Character-level tokenizer, lossless over its training alphabet.

Four special ids lead the vocabulary (pad, bos, eos, unk); every character
seen at build time gets the next id in sorted order. Decoding drops the
specials, so encode/decode round-trips any text whose characters are all in
the alphabet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import AdapterError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
_N_SPECIALS = 4


@dataclass(frozen=True)
class CharTokenizer:
    alphabet: str  # sorted, each character maps to _N_SPECIALS + index

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "CharTokenizer":
        chars = sorted({ch for text in texts for ch in text})
        return cls(alphabet="".join(chars))

    @property
    def vocab_size(self) -> int:
        return _N_SPECIALS + len(self.alphabet)

    def encode(self, text: str) -> list[int]:
        stoi = self._stoi()
        return [stoi.get(ch, UNK_ID) for ch in text]

    def decode(self, ids: Iterable[int]) -> str:
        return "".join(
            self.alphabet[i - _N_SPECIALS]
            for i in ids
            if _N_SPECIALS <= i < self.vocab_size
        )

    def _stoi(self) -> dict[str, int]:
        return {ch: _N_SPECIALS + i for i, ch in enumerate(self.alphabet)}

    def save(self, path: str | Path) -> None:
        payload = {"alphabet": self.alphabet}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CharTokenizer":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            alphabet = payload["alphabet"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise AdapterError(f"tokenizer file {path} is unreadable: {exc}") from exc
        if not isinstance(alphabet, str):
            raise AdapterError(f"tokenizer file {path} has a malformed alphabet")
        return cls(alphabet=alphabet)
