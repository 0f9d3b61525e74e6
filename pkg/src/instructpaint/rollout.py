"""Deterministic eval-mode inference steps, shared verbatim by the batch
evaluator and the live session service so both produce identical images."""

import numpy as np
import torch

from .config import GenConfig
from .data.render import empty_canvas, from_unit, to_unit
from .models import ManipulatorModel, pad_batch
from .text import Vocabulary, tokenize


def encode_instruction(model: ManipulatorModel, vocab: Vocabulary, text: str,
                       h_prev: torch.Tensor):
    """Advance the history state with one instruction; returns (h, condition, c)."""
    ids = tokenize(text, vocab)
    tokens, lengths = pad_batch([ids], model.cfg.max_len)
    enc = model.encoder
    with torch.no_grad():
        d = enc.encode_words(tokens, lengths)
        h = enc.advance_history(d, h_prev) if model.cfg.use_history else h_prev
        cond = enc.condition(d, h)
        c, _ = enc.augment(cond, sample=False)
    return h, cond, c


def generate_step(model: ManipulatorModel, image_u8: np.ndarray, c: torch.Tensor) -> np.ndarray:
    """One generator application; the output canvas is quantized to uint8 so the
    next step consumes exactly what a client sees."""
    x = torch.from_numpy(to_unit(image_u8)).unsqueeze(0)
    with torch.no_grad():
        out = model.generator(x, c)
    return from_unit(out.squeeze(0).numpy())


def step_canvas(model: ManipulatorModel, vocab: Vocabulary, h_prev: torch.Tensor,
                image_u8: np.ndarray, text: str):
    """encode -> generate; returns (h_next, next canvas)."""
    model.eval()
    h, _, c = encode_instruction(model, vocab, text, h_prev)
    return h, generate_step(model, image_u8, c)


def rollout_episode(model: ManipulatorModel, vocab: Vocabulary, gen_cfg: GenConfig,
                    instructions: list[str]) -> list[np.ndarray]:
    """Run a whole instruction sequence feeding the model its own outputs;
    returns the generated canvas after every instruction."""
    model.eval()
    h = model.encoder.initial_history(1)
    image = empty_canvas(gen_cfg.canvas_size, gen_cfg.palette)
    frames = []
    for text in instructions:
        h, image = step_canvas(model, vocab, h, image, text)
        frames.append(image)
    return frames
