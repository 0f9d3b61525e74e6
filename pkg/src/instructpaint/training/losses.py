"""Hinge adversarial objectives and the inconsistent-pair construction."""

import logging

import torch

from ..config import LossWeights

logger = logging.getLogger(__name__)


def d_loss_real(r: torch.Tensor) -> torch.Tensor:
    """Mean hinge on real pairs: max(0, 1 - r)."""
    return torch.clamp(1.0 - r, min=0.0).mean()


def d_loss_fake(r: torch.Tensor) -> torch.Tensor:
    """Mean hinge on generated pairs: max(0, 1 + r)."""
    return torch.clamp(1.0 + r, min=0.0).mean()


def d_loss_inconsistent(r: torch.Tensor) -> torch.Tensor:
    """Same hinge as the fake term, on real pairs with mismatched conditions."""
    return torch.clamp(1.0 + r, min=0.0).mean()


def total_d_loss(real, fake, incons, weights: LossWeights, kl=0.0) -> torch.Tensor:
    """real + alpha * fake + beta * incons, plus the condition-augmentation KL
    term that rides along on the discriminator pass (it trains the encoder)."""
    total = real + weights.alpha * fake
    if incons is not None:
        total = total + weights.beta * incons
    return total + weights.kl_weight * kl


def g_loss(r_fake: torch.Tensor) -> torch.Tensor:
    """Generator objective: -mean discriminator score on generated pairs."""
    return -r_fake.mean()


def make_mismatched(h_batch: torch.Tensor) -> torch.Tensor | None:
    """Cyclic shift by one within the batch; every row gets another episode's
    condition. Returns None (term skipped) for batches of one."""
    if h_batch.shape[0] < 2:
        logger.warning("batch of 1: inconsistent-pair loss term skipped")
        return None
    return torch.roll(h_batch, shifts=-1, dims=0)
