"""Image generator: residual image encoder, intent projection to feature
space, additive composition, and a condition-normalized transposed-conv decoder."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config import ModelConfig
from .functional import compose
from .layers import ConditionalBatchNorm2d, ResBlock, SNConv2d, SNConvTranspose2d


def _encoder_channels(feat_channels: int) -> list[int]:
    return [feat_channels // 4, feat_channels // 2, feat_channels, feat_channels]


def _down_pattern(resolution: int, feat_size: int) -> list[bool]:
    downs = (resolution // feat_size).bit_length() - 1
    return [i < downs for i in range(4)]


class ImageEncoder(nn.Module):
    """Four residual blocks, 3x3 kernels, 2x2 average pooling on the
    downsampling blocks. Batch-normalized for the generator; spectral-normalized
    (no batch norm) for the discriminator."""

    def __init__(self, cfg: ModelConfig, spectral: bool):
        super().__init__()
        chans = _encoder_channels(cfg.feat_channels)
        downs = _down_pattern(cfg.resolution, cfg.feat_size)
        norm = None if spectral else "batch"
        leaky = 0.2 if spectral else 0.0
        blocks = []
        in_ch = 3
        for out_ch, down in zip(chans, downs):
            blocks.append(ResBlock(in_ch, out_ch, down, norm=norm, spectral=spectral, leaky=leaky))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.resolution = cfg.resolution

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.shape[-2:] != (self.resolution, self.resolution) or image.shape[-3] != 3:
            raise ValueError(
                f"expected 3x{self.resolution}x{self.resolution} input, got {tuple(image.shape[-3:])}")
        h = image
        for block in self.blocks:
            h = block(h)
        return h


class IntentProjector(nn.Module):
    """MLP from the condition vector to a C x S x S semantic-increment map."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.shape = (cfg.feat_channels, cfg.feat_size, cfg.feat_size)
        dims = [cfg.cond_dim, *cfg.intent_hidden]
        layers: list[nn.Module] = []
        for d_in, d_out in zip(dims, dims[1:]):
            layers += [nn.Linear(d_in, d_out), nn.ReLU()]
        layers.append(nn.Linear(dims[-1], cfg.feat_channels * cfg.feat_size ** 2))
        self.mlp = nn.Sequential(*layers)

    def forward(self, c: torch.Tensor) -> torch.Tensor:
        return self.mlp(c).reshape(c.shape[0], *self.shape)


class Decoder(nn.Module):
    """Stacked spectral-normalized transposed convolutions, each followed by
    conditional batch normalization on the condition vector; tanh output."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        stages = (cfg.resolution // cfg.feat_size).bit_length() - 1
        ch = 2 * cfg.feat_channels
        ups, norms = [], []
        for _ in range(stages):
            ups.append(SNConvTranspose2d(ch, ch // 2, 4, stride=2, padding=1))
            norms.append(ConditionalBatchNorm2d(ch // 2, cfg.cond_dim))
            ch //= 2
        self.ups = nn.ModuleList(ups)
        self.norms = nn.ModuleList(norms)
        self.to_rgb = SNConv2d(ch, 3, 3, padding=1)

    def forward(self, feats: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        h = feats
        for up, norm in zip(self.ups, self.norms):
            h = F.relu(norm(up(h), c))
        return torch.tanh(self.to_rgb(h))


class Generator(nn.Module):
    """Paints the change a condition vector asks for onto a source canvas."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.image_encoder = ImageEncoder(cfg, spectral=False)
        self.intent = IntentProjector(cfg)
        self.decoder = Decoder(cfg)

    def encode_image(self, image: torch.Tensor) -> torch.Tensor:
        return self.image_encoder(image)

    def project_intent(self, c: torch.Tensor) -> torch.Tensor:
        return self.intent(c)

    def decode(self, core: torch.Tensor, visual: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        return self.decoder(torch.cat([core, visual], dim=1), c)

    def forward(self, image_prev: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        visual = self.encode_image(image_prev)
        increment = self.project_intent(c)
        if self.cfg.increment_reasoning:
            core = compose(visual, increment)
        else:
            core = increment  # ablation: concatenate instead of add
        return self.decode(core, visual, c)
