"""Reasoning discriminator: a shared spectral-normalized image encoder for
source and target, feature subtraction, and projection-style scoring."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import ModelConfig
from .functional import visual_increment
from .generator import ImageEncoder
from .layers import SNLinear


class Discriminator(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.image_encoder = ImageEncoder(cfg, spectral=True)
        flat = 2 * cfg.feat_channels * cfg.feat_size ** 2
        self.fuse_hidden = SNLinear(flat, cfg.fusion_hidden)
        self.fuse_out = SNLinear(cfg.fusion_hidden, cfg.condition_width)
        self.psi = SNLinear(cfg.condition_width, 1)

    def encode_image(self, image: torch.Tensor) -> torch.Tensor:
        """Both source and target pass through this same encoder instance."""
        return self.image_encoder(image)

    def fuse(self, increment: torch.Tensor, visual_prev: torch.Tensor) -> torch.Tensor:
        """phi: concatenated feature maps -> condition-width vector."""
        if increment.shape != visual_prev.shape:
            raise ValueError(
                f"feature map shape mismatch: {tuple(increment.shape)} vs {tuple(visual_prev.shape)}")
        x = torch.cat([increment, visual_prev], dim=1).flatten(start_dim=1)
        return self.fuse_out(F.leaky_relu(self.fuse_hidden(x), 0.2))

    def project_score(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        """r = <h, x> + psi(x)."""
        if x.shape[-1] != h.shape[-1]:
            raise ValueError(f"condition width mismatch: {x.shape[-1]} vs {h.shape[-1]}")
        return (h * x).sum(dim=-1) + self.psi(x).squeeze(-1)

    def score(self, increment: torch.Tensor, visual_prev: torch.Tensor,
              h: torch.Tensor) -> torch.Tensor:
        return self.project_score(self.fuse(increment, visual_prev), h)

    def forward(self, image_t: torch.Tensor, image_prev: torch.Tensor,
                h: torch.Tensor) -> torch.Tensor:
        feat_t = self.encode_image(image_t)
        feat_prev = self.encode_image(image_prev)
        if self.cfg.increment_reasoning:
            evidence = visual_increment(feat_t, feat_prev)
        else:
            evidence = feat_t  # ablation: concatenation without subtraction
        return self.score(evidence, feat_prev, h)
