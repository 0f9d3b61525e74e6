"""Feature-map increment algebra shared by the generator and discriminator."""

import torch


def _check_same_shape(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise ValueError(f"feature map shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def compose(visual: torch.Tensor, increment: torch.Tensor) -> torch.Tensor:
    """Element-wise addition of the semantic increment onto image features."""
    _check_same_shape(visual, increment)
    return visual + increment


def visual_increment(feat_t: torch.Tensor, feat_prev: torch.Tensor) -> torch.Tensor:
    """Element-wise difference between target and source feature maps."""
    _check_same_shape(feat_t, feat_prev)
    return feat_t - feat_prev
