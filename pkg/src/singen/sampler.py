"""Inference over a trained cascade: unconditional and arbitrary-size
generation, generation from intermediate scales, harmonization, editing.

Generation from an intermediate scale s feeds the area-downsampled real
image (plus scale noise) into generator s, with feedback computed by the
scale-(s+1) discriminator on the same image downsampled to its scale; the
chain then ascends normally. Harmonization is the same entry path with a
composite image instead of the real one. Arbitrary-size generation rescales
every scale's working dims proportionally; the attention blocks operate at
their fixed internal size, so they are indifferent to the change.
"""

from __future__ import annotations

import torch

from .pyramid import Dims
from .smoothing import smooth
from .trainer import Cascade, run_chain


def _resolve_rng(rng: torch.Generator | None, seed: int | None) -> torch.Generator:
    if rng is not None:
        return rng
    return torch.Generator().manual_seed(0 if seed is None else seed)


def _scaled_dims(cascade: Cascade, out_dims: Dims) -> list[Dims]:
    base = cascade.pyramid.all_dims()
    h0, w0 = base[0]
    th, tw = out_dims
    dims = [(max(1, round(h * th / h0)), max(1, round(w * tw / w0))) for h, w in base]
    dims[0] = (th, tw)
    min_size = cascade.cfg.model.min_input_size
    if min(dims[-1]) < min_size:
        raise ValueError(
            f"out_dims {out_dims} shrink the coarsest scale to {dims[-1]}, below "
            f"the receptive-field minimum {min_size}")
    return dims


def generate(cascade: Cascade, count: int = 1, *, start_scale: int | None = None,
             rng: torch.Generator | None = None, seed: int | None = None,
             out_dims: Dims | None = None, noise_scale: float = 1.0) -> list[torch.Tensor]:
    """Draw `count` images at finest-scale dims (or `out_dims`)."""
    cascade.require_complete()
    coarsest = cascade.coarsest_index
    s = coarsest if start_scale is None else start_scale
    if not 0 <= s <= coarsest:
        raise ValueError(f"start_scale must be in [0, {coarsest}], got {s}")
    dims = cascade.pyramid.all_dims() if out_dims is None else _scaled_dims(cascade, out_dims)
    rng = _resolve_rng(rng, seed)
    images = []
    for _ in range(count):
        if s == coarsest:
            x = run_chain(cascade.models, dims, rng, noise_scale=noise_scale)
        else:
            x = run_chain(cascade.models, dims, rng, source=cascade.pyramid[0],
                          start_scale=s, noise_scale=noise_scale)
        images.append(x)
    return images


def harmonize(cascade: Cascade, composite: torch.Tensor, inject_scale: int, *,
              rng: torch.Generator | None = None, seed: int | None = None,
              noise_scale: float = 1.0) -> torch.Tensor:
    """Repaint a composite so the pasted content adopts the trained image's
    patch statistics; deeper injection repaints more."""
    cascade.require_complete()
    coarsest = cascade.coarsest_index
    if not 0 <= inject_scale < coarsest:
        raise ValueError(
            f"inject_scale must be in [0, {coarsest - 1}] (the coarsest scale "
            "has no prior path to inject into)")
    rng = _resolve_rng(rng, seed)
    return run_chain(cascade.models, cascade.pyramid.all_dims(), rng,
                     source=composite, start_scale=inject_scale,
                     noise_scale=noise_scale)


def edit(cascade: Cascade, edited_image: torch.Tensor, mask: torch.Tensor,
         inject_scale: int, *, rng: torch.Generator | None = None,
         seed: int | None = None, feather_px: int = 5,
         noise_scale: float = 1.0) -> torch.Tensor:
    """Blend the repainted edit back into the edited image under a feathered
    binary mask; pixels beyond the feather width keep their original values
    bit-exactly."""
    finest = cascade.pyramid.dims(0)
    if tuple(edited_image.shape[-2:]) != finest:
        raise ValueError(f"edited image must be at finest dims {finest}, "
                         f"got {tuple(edited_image.shape[-2:])}")
    if mask.dim() != 4 or mask.shape[1] != 1 or tuple(mask.shape[-2:]) != finest:
        raise ValueError(f"mask must have shape (1, 1, {finest[0]}, {finest[1]}), "
                         f"got {tuple(mask.shape)}")
    mask = mask.float()
    if not bool(((mask == 0.0) | (mask == 1.0)).all()):
        raise ValueError("mask must be binary (0/1 valued)")
    harmonized = harmonize(cascade, edited_image, inject_scale, rng=rng,
                           seed=seed, noise_scale=noise_scale)
    if feather_px > 0:
        # Kernel radius = ceil(3 sigma) = feather_px, so the ramp dies out
        # exactly feather_px outside the mask.
        blend = torch.maximum(mask, smooth(mask, feather_px / 3.0))
    else:
        blend = mask
    mixed = blend * harmonized + (1.0 - blend) * edited_image
    mixed = torch.where(blend >= 1.0, harmonized, mixed)
    return torch.where(blend <= 0.0, edited_image, mixed)
