"""Loss functions for the adversarial retargeting objectives.

Least-squares GAN terms for the discriminator and generator, plus the three
consistency terms: position-space cycle consistency (cyclegan mode), and the
reconstruction + latent pair used in unit mode. Every squared norm is the
mean over all elements, so the default weights are independent of clip
length, joint count, and batch size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, square, subtract, tensor_mean
from .errors import ShapeError, ValidationError

MODES = ("cyclegan", "unit")


@dataclass(frozen=True)
class LossWeights:
    cycle: float = 10.0
    vae: float = 10.0
    latent_cycle: float = 10.0
    latent_penalty: float = 0.01

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle,
            "vae": self.vae,
            "latent_cycle": self.latent_cycle,
            "latent_penalty": self.latent_penalty,
        }


@dataclass
class LossBreakdown:
    """Named scalar per active term; total_g is the weighted generator sum."""

    adv_d: float | None = None
    adv_g: float | None = None
    cycle: float | None = None
    vae: float | None = None
    latent_cycle: float | None = None
    total_g: float | None = None
    extras: dict[str, float] = field(default_factory=dict)

    def as_columns(self) -> list[tuple[str, float]]:
        """Active terms in a stable order, for trace serialization."""
        cols = []
        for name in ("adv_d", "adv_g", "cycle", "vae", "latent_cycle"):
            value = getattr(self, name)
            if value is not None:
                cols.append((name, value))
        cols.extend(sorted(self.extras.items()))
        if self.total_g is not None:
            cols.append(("total_g", self.total_g))
        return cols


def _check_batch(scores: Tensor, name: str) -> None:
    if scores.size == 0:
        raise ShapeError(f"{name}: empty score batch")


def loss_discriminator(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    """Least-squares discriminator loss: 0.5 E[(real - 1)^2] + 0.5 E[fake^2]."""
    _check_batch(real_scores, "loss_discriminator")
    _check_batch(fake_scores, "loss_discriminator")
    real_term = tensor_mean(square(subtract(real_scores, Tensor.constant(1.0))))
    fake_term = tensor_mean(square(fake_scores))
    return 0.5 * real_term + 0.5 * fake_term


def loss_generator_adv(fake_scores: Tensor) -> Tensor:
    """Least-squares generator term: 0.5 E[(fake - 1)^2]."""
    _check_batch(fake_scores, "loss_generator_adv")
    return 0.5 * tensor_mean(square(subtract(fake_scores, Tensor.constant(1.0))))


def loss_cycle(x: Tensor, x_roundtrip: Tensor) -> Tensor:
    """Mean-per-element squared error between a motion and its round trip."""
    if x.shape != x_roundtrip.shape:
        raise ShapeError(f"loss_cycle: shapes {x.shape} and {x_roundtrip.shape} differ")
    return tensor_mean(square(subtract(x, x_roundtrip)))


def loss_vae(x: Tensor, reconstruction: Tensor, z: Tensor, latent_penalty: float = 0.01) -> Tensor:
    """Reconstruction error plus a weighted latent magnitude penalty."""
    if x.shape != reconstruction.shape:
        raise ShapeError(
            f"loss_vae: shapes {x.shape} and {reconstruction.shape} differ"
        )
    recon = tensor_mean(square(subtract(x, reconstruction)))
    return recon + latent_penalty * tensor_mean(square(z))


def loss_latent_cycle(z_source: Tensor, z_of_translation: Tensor) -> Tensor:
    """Mean-per-element squared difference between latents (symmetric)."""
    if z_source.shape != z_of_translation.shape:
        raise ShapeError(
            f"loss_latent_cycle: shapes {z_source.shape} and {z_of_translation.shape} differ"
        )
    return tensor_mean(square(subtract(z_source, z_of_translation)))


def total_generator_objective(
    mode: str,
    adv_g: Tensor,
    cycle: Tensor | None = None,
    vae: Tensor | None = None,
    latent_cycle: Tensor | None = None,
    weights: LossWeights = LossWeights(),
) -> tuple[Tensor, LossBreakdown]:
    """Combine the mode's active terms into the scalar generator objective.

    cyclegan: adv_g + w_cycle * cycle. unit: adv_g + w_vae * vae +
    w_latent * latent_cycle. Returns the taped total plus a float breakdown.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    breakdown = LossBreakdown(adv_g=adv_g.item())
    if mode == "cyclegan":
        if cycle is None:
            raise ValidationError("cyclegan mode requires the cycle term")
        total = adv_g + weights.cycle * cycle
        breakdown.cycle = cycle.item()
    else:
        if vae is None or latent_cycle is None:
            raise ValidationError("unit mode requires the vae and latent_cycle terms")
        total = adv_g + weights.vae * vae + weights.latent_cycle * latent_cycle
        breakdown.vae = vae.item()
        breakdown.latent_cycle = latent_cycle.item()
    breakdown.total_g = total.item()
    return total, breakdown
