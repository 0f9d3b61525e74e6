from .losses import (
    d_loss_fake,
    d_loss_inconsistent,
    d_loss_real,
    g_loss,
    make_mismatched,
    total_d_loss,
)
from .loop import (
    DivergenceError,
    EpisodeTensors,
    StepLosses,
    build_optimizers,
    fit,
    train_sequence,
)

__all__ = [
    "d_loss_real", "d_loss_fake", "d_loss_inconsistent", "total_d_loss",
    "g_loss", "make_mismatched",
    "DivergenceError", "EpisodeTensors", "StepLosses",
    "build_optimizers", "fit", "train_sequence",
]
