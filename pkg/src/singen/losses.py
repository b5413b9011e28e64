"""WGAN-GP adversarial losses plus the fixed-noise reconstruction term.

The critic's scalar score is the spatial mean of its patch score map. The
discriminator minimizes mean(D(fake)) - mean(D(real)) + lambda * gp, the
generator minimizes -mean(D(fake)) + alpha * MSE(reconstruction, target).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def _score(dis, image: torch.Tensor) -> torch.Tensor:
    return dis(image).mean()


def gradient_penalty(dis, real: torch.Tensor, fake: torch.Tensor,
                     rng: torch.Generator) -> torch.Tensor:
    """Squared deviation from 1 of the critic's gradient norm at a random
    interpolate between real and fake (one epsilon per sample)."""
    eps = torch.rand(real.shape[0], 1, 1, 1, generator=rng, dtype=real.dtype)
    x_hat = eps * real.detach() + (1.0 - eps) * fake.detach()
    x_hat.requires_grad_(True)
    grads = torch.autograd.grad(_score(dis, x_hat), x_hat, create_graph=True)[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def d_loss(dis, real: torch.Tensor, fake: torch.Tensor, lambda_gp: float,
           rng: torch.Generator, return_parts: bool = False):
    """Critic loss on one real/fake pair; `real` should already be smoothed
    at attention scales. `fake` is treated as fixed (detached)."""
    if real.shape != fake.shape:
        raise ValueError(f"real {tuple(real.shape)} and fake {tuple(fake.shape)} "
                         "shapes must match")
    adv = _score(dis, fake.detach()) - _score(dis, real.detach())
    gp = gradient_penalty(dis, real, fake, rng)
    loss = adv + lambda_gp * gp
    if return_parts:
        return loss, {"d_adv": adv.item(), "gp": gp.item()}
    return loss


def g_loss(dis, fake: torch.Tensor, fake_rec: torch.Tensor,
           target_rec: torch.Tensor, alpha: float, return_parts: bool = False):
    """Generator loss: adversarial score on the fresh sample plus the
    weighted squared error of the zero-noise reconstruction."""
    if fake_rec.shape != target_rec.shape:
        raise ValueError(f"reconstruction {tuple(fake_rec.shape)} and target "
                         f"{tuple(target_rec.shape)} shapes must match")
    adv = -_score(dis, fake)
    rec = F.mse_loss(fake_rec, target_rec)
    loss = adv + alpha * rec
    if return_parts:
        return loss, {"g_adv": adv.item(), "rec_mse": rec.item()}
    return loss
