"""Hierarchical instruction encoder: bidirectional word-level recurrence,
instruction-level history recurrence, and Gaussian condition augmentation."""

import logging

import torch
import torch.nn as nn

from ..config import ModelConfig
from .layers import LayerNormGRUCell

logger = logging.getLogger(__name__)


def pad_batch(token_lists: list[list[int]], max_len: int, pad_id: int = 0):
    """Stack variable-length id lists into (tokens, lengths); overlong inputs
    are truncated with a logged warning."""
    clipped = []
    for ids in token_lists:
        if not ids:
            raise ValueError("cannot encode an empty token sequence")
        if len(ids) > max_len:
            logger.warning("truncating instruction of %d tokens to %d", len(ids), max_len)
            ids = ids[:max_len]
        clipped.append(ids)
    width = max(len(ids) for ids in clipped)
    tokens = torch.full((len(clipped), width), pad_id, dtype=torch.long)
    lengths = torch.zeros(len(clipped), dtype=torch.long)
    for i, ids in enumerate(clipped):
        tokens[i, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        lengths[i] = len(ids)
    return tokens, lengths


def gaussian_kl(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, sigma^2) || N(0, I)), summed over features, averaged over batch."""
    per_sample = 0.5 * (mu.pow(2) + logvar.exp() - logvar - 1.0).sum(dim=-1)
    return per_sample.mean()


class WordEncoder(nn.Module):
    """Bidirectional layer-normalized GRU over embedded tokens; returns the
    concatenated final states of the two directions."""

    def __init__(self, vocab_size: int, embed_dim: int, hidden: int):
        super().__init__()
        assert hidden % 2 == 0
        self.half = hidden // 2
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=0)
        self.fwd = LayerNormGRUCell(embed_dim, self.half)
        self.bwd = LayerNormGRUCell(embed_dim, self.half)

    def forward(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        emb = self.embedding(tokens)
        batch, width, _ = emb.shape
        h_f = emb.new_zeros(batch, self.half)
        h_b = emb.new_zeros(batch, self.half)
        for i in range(width):
            mask = (lengths > i).to(emb.dtype).unsqueeze(1)
            h_f = mask * self.fwd(emb[:, i], h_f) + (1.0 - mask) * h_f
        for i in reversed(range(width)):
            mask = (lengths > i).to(emb.dtype).unsqueeze(1)
            h_b = mask * self.bwd(emb[:, i], h_b) + (1.0 - mask) * h_b
        return torch.cat([h_f, h_b], dim=1)


class ConditionAugmenter(nn.Module):
    """Reparameterized Gaussian around a projected condition, with closed-form KL."""

    def __init__(self, cond_in: int, cond_out: int):
        super().__init__()
        self.fc = nn.Linear(cond_in, 2 * cond_out)

    def forward(self, h: torch.Tensor, sample: bool, generator=None):
        mu, logvar = self.fc(h).chunk(2, dim=-1)
        if not sample:
            return mu, mu.new_zeros(())
        std = torch.exp(0.5 * logvar)
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
        return mu + std * eps, gaussian_kl(mu, logvar)


class TextEncoder(nn.Module):
    """Word-level encoding, history accumulation, and condition augmentation.

    The history state starts at zero for every episode; `condition` selects the
    history vector (default) or the word-level vector (history ablation).
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.word = WordEncoder(cfg.vocab_size, cfg.embed_dim, cfg.word_hidden)
        self.history = LayerNormGRUCell(cfg.word_hidden, cfg.history_hidden)
        self.augment = ConditionAugmenter(cfg.condition_width, cfg.cond_dim)

    def initial_history(self, batch: int) -> torch.Tensor:
        p = next(self.parameters())
        return p.new_zeros(batch, self.cfg.history_hidden)

    def encode_words(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.word(tokens, lengths)

    def advance_history(self, d: torch.Tensor, h_prev: torch.Tensor) -> torch.Tensor:
        if d.shape[-1] != self.cfg.word_hidden or h_prev.shape[-1] != self.cfg.history_hidden:
            raise ValueError(
                f"dimension mismatch: d {tuple(d.shape)}, h {tuple(h_prev.shape)}")
        return self.history(d, h_prev)

    def condition(self, d: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        return h if self.cfg.use_history else d

    def word_parameters(self):
        return list(self.word.parameters())

    def instruction_parameters(self):
        return list(self.history.parameters()) + list(self.augment.parameters())
