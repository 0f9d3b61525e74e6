from .layers import (
    ConditionalBatchNorm2d,
    LayerNormGRUCell,
    ResBlock,
    SNConv2d,
    SNConvTranspose2d,
    SNLinear,
    initialize_parameters,
    spectral_layers,
    spectral_normalize,
)
from .encoder import ConditionAugmenter, TextEncoder, WordEncoder, gaussian_kl, pad_batch
from .functional import compose, visual_increment
from .generator import Decoder, Generator, ImageEncoder, IntentProjector
from .discriminator import Discriminator
from .model import ManipulatorModel

__all__ = [
    "ConditionalBatchNorm2d", "LayerNormGRUCell", "ResBlock",
    "SNConv2d", "SNConvTranspose2d", "SNLinear",
    "initialize_parameters", "spectral_layers", "spectral_normalize",
    "ConditionAugmenter", "TextEncoder", "WordEncoder", "gaussian_kl", "pad_batch",
    "compose", "visual_increment",
    "Decoder", "Generator", "ImageEncoder", "IntentProjector",
    "Discriminator", "ManipulatorModel",
]
