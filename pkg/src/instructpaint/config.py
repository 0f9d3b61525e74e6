"""Configuration dataclasses shared by data generation, models, training, and serving."""

from dataclasses import dataclass, field, asdict, fields
from typing import Any

DEFAULT_SHAPES = ("square", "circle", "triangle")
DEFAULT_COLORS = ("red", "green", "blue", "yellow", "purple", "cyan")

# Fixed palette constants (uint8 RGB). Exported into every dataset manifest so
# detectors and renders can be compared bit-exactly.
DEFAULT_PALETTE: dict[str, tuple[int, int, int]] = {
    "background": (16, 16, 16),
    "red": (230, 60, 60),
    "green": (70, 200, 90),
    "blue": (65, 105, 225),
    "yellow": (240, 220, 70),
    "purple": (160, 80, 200),
    "cyan": (80, 210, 220),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    """Parameters of the synthetic episode generator and renderer."""

    shapes: tuple[str, ...] = DEFAULT_SHAPES
    colors: tuple[str, ...] = DEFAULT_COLORS
    steps: int = 5
    canvas_size: int = 64
    object_size: float = 0.09      # half-extent, fraction of canvas
    margin: float = 0.02           # padding between object edge and canvas border
    min_separation: float = 0.18   # min center distance between objects
    relation_margin: float = 0.12  # min center delta for a stated relation
    combo_prob: float = 0.75       # probability a relative instruction constrains both axes
    pronoun_prob: float = 0.3      # probability "it" replaces the last-added anchor
    anchor_last_prob: float = 0.5  # probability the anchor is the last-added object
    max_attempts: int = 200
    allow_overlap: bool = False    # permit small overlaps (separation scaled down)
    palette: dict[str, tuple[int, int, int]] = field(
        default_factory=lambda: dict(DEFAULT_PALETTE)
    )

    def __post_init__(self):
        if len(self.shapes) < 2 or len(self.colors) < 2:
            raise ConfigError("shape and color catalogs need at least 2 entries each")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        missing = [c for c in self.colors if c not in self.palette]
        if missing or "background" not in self.palette:
            raise ConfigError(f"palette missing entries: {missing or ['background']}")

    @property
    def effective_separation(self) -> float:
        return self.min_separation * (0.45 if self.allow_overlap else 1.0)

    def pair_count(self) -> int:
        return len(self.shapes) * len(self.colors)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the encoder, generator, and discriminator."""

    vocab_size: int
    embed_dim: int = 64          # word embedding width
    word_hidden: int = 256       # bidirectional word encoder output width (even)
    history_hidden: int = 256    # instruction-level recurrent state width
    cond_dim: int = 256          # augmented condition width
    feat_channels: int = 128     # feature map channels
    feat_size: int = 8           # feature map spatial size
    resolution: int = 64
    intent_hidden: tuple[int, ...] = (256,)  # hidden widths of the intent projection MLP
    fusion_hidden: int = 256     # hidden width of the discriminator fusion MLP
    max_len: int = 16
    use_history: bool = True         # False: condition on the word-level vector only
    increment_reasoning: bool = True  # False: concatenate features instead of add/subtract

    def __post_init__(self):
        if self.word_hidden % 2 != 0:
            raise ConfigError("word_hidden must be even (two directions are concatenated)")
        downs = (self.resolution // self.feat_size).bit_length() - 1
        if self.feat_size * (2 ** downs) != self.resolution:
            raise ConfigError(
                f"resolution {self.resolution} must be feat_size {self.feat_size} * 2^k"
            )
        if downs > 4:
            raise ConfigError("at most 4 downsampling stages are available")
        if self.feat_channels % 4 != 0:
            raise ConfigError("feat_channels must be divisible by 4")

    @property
    def condition_width(self) -> int:
        """Width of the raw conditioning vector fed to augmentation and projection."""
        return self.history_hidden if self.use_history else self.word_hidden

    @classmethod
    def paper_scale(cls, vocab_size: int) -> "ModelConfig":
        return cls(
            vocab_size=vocab_size,
            embed_dim=300,
            word_hidden=1024,
            history_hidden=1024,
            cond_dim=1024,
            feat_channels=256,
            feat_size=16,
            resolution=128,
        )


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0     # fake-loss weight
    beta: float = 1.0      # inconsistent-pair weight
    kl_weight: float = 0.5

    def __post_init__(self):
        if min(self.alpha, self.beta, self.kl_weight) < 0:
            raise ConfigError("loss weights must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    lr_generator: float = 0.0001
    lr_discriminator: float = 0.0004
    lr_word_encoder: float = 0.003
    lr_instruction_encoder: float = 0.006
    betas_gan: tuple[float, float] = (0.0, 0.9)
    betas_encoder: tuple[float, float] = (0.999, 0.9)
    weights: LossWeights = field(default_factory=LossWeights)
    encoder_clip_norm: float = 10.0
    eval_every: int = 1
    # ablation switches
    no_history: bool = False
    no_increment_reasoning: bool = False
    split_encoders: bool = False


@dataclass(frozen=True)
class LocalizerConfig:
    grid: int = 8
    base_channels: int = 32
    lr: float = 0.002
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 8
    detect_threshold: float = 0.5
    min_images: int = 100
    seed: int = 0


def config_to_dict(cfg) -> dict[str, Any]:
    return asdict(cfg)


def _coerce(cls, data: dict[str, Any]):
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        v = data[f.name]
        if isinstance(v, list):
            v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
        if f.name == "palette":
            v = {k: tuple(c) for k, c in v.items()}
        if f.name == "weights" and isinstance(v, dict):
            v = LossWeights(**v)
        kwargs[f.name] = v
    return cls(**kwargs)


def gen_config_from_dict(data: dict[str, Any]) -> GenConfig:
    return _coerce(GenConfig, data)


def model_config_from_dict(data: dict[str, Any]) -> ModelConfig:
    return _coerce(ModelConfig, data)


def train_config_from_dict(data: dict[str, Any]) -> TrainConfig:
    return _coerce(TrainConfig, data)
