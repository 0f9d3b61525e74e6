"""Vocabulary and tokenizer for instruction text."""

import re

from .config import GenConfig
from .data.grammar import grammar_tokens

PAD, UNK = "<pad>", "<unk>"
_WORD = re.compile(r"[a-z]+")


class Vocabulary:
    """Dense token -> id map with PAD at 0 and UNK at 1."""

    def __init__(self, tokens: list[str]):
        if tokens[:2] != [PAD, UNK]:
            tokens = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @classmethod
    def from_config(cls, config: GenConfig) -> "Vocabulary":
        return cls([PAD, UNK] + grammar_tokens(config.shapes, config.colors))


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Lowercase, split on non-letters, map to ids (UNK for unknown words)."""
    if not text or not text.strip():
        raise ValueError("cannot tokenize empty text")
    words = _WORD.findall(text.lower())
    if not words:
        raise ValueError(f"no tokens in {text!r}")
    return [vocab.index.get(w, vocab.unk_id) for w in words]
