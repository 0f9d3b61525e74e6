"""instructpaint: iterative instruction-guided canvas editing.

Synthetic relational episodes, an increment-reasoning GAN (encoder, generator,
discriminator), adversarial training, detector-based evaluation, and a
session HTTP service for live manipulation.
"""

__version__ = "0.1.0"

from .config import GenConfig, ModelConfig, TrainConfig, LossWeights, LocalizerConfig

__all__ = [
    "GenConfig",
    "ModelConfig",
    "TrainConfig",
    "LossWeights",
    "LocalizerConfig",
    "__version__",
]
