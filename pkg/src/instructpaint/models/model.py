"""The full manipulation model: text encoder(s), generator, discriminator."""

import torch
import torch.nn as nn

from ..config import ModelConfig
from .discriminator import Discriminator
from .encoder import TextEncoder
from .generator import Generator
from .layers import initialize_parameters


class ManipulatorModel(nn.Module):
    """Bundles the trainable components and owns parameter-group boundaries.

    `encoder` conditions both the generator and the discriminator and is
    trained through the discriminator objective only. With `split_encoders` a
    second encoder conditions the generator instead (intention-purification
    ablation).
    """

    def __init__(self, cfg: ModelConfig, split_encoders: bool = False, seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.cfg = cfg
        self.encoder = TextEncoder(cfg)
        self.encoder_g = TextEncoder(cfg) if split_encoders else None
        self.generator = Generator(cfg)
        self.discriminator = Discriminator(cfg)
        initialize_parameters(self)

    @property
    def split_encoders(self) -> bool:
        return self.encoder_g is not None

    def generator_side_encoder(self) -> TextEncoder:
        return self.encoder_g if self.encoder_g is not None else self.encoder

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        groups = {
            "generator": list(self.generator.parameters()),
            "discriminator": list(self.discriminator.parameters()),
            "encoder_word": self.encoder.word_parameters(),
            "encoder_instruction": self.encoder.instruction_parameters(),
        }
        if self.encoder_g is not None:
            groups["encoder_g_word"] = self.encoder_g.word_parameters()
            groups["encoder_g_instruction"] = self.encoder_g.instruction_parameters()
        return groups

    def checksums(self) -> dict[str, float]:
        """Cheap per-group parameter fingerprints for routing assertions."""
        out = {}
        with torch.no_grad():
            for name, params in self.parameter_groups().items():
                out[name] = float(sum(p.double().abs().sum() for p in params))
        return out
