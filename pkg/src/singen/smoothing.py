"""Gaussian kernels and the randomized smoothing of real discriminator inputs.

At attention scales the discriminator never sees the raw training image:
each forward pass draws a fresh std from U(sigma_min, sigma_max) and blurs
the real image with it. Reconstruction targets use the fixed sigma_rec.
Generated images are never smoothed.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from .config import SmoothingSpec


def _kernel_1d(sigma: float) -> torch.Tensor:
    radius = math.ceil(3.0 * sigma)
    x = torch.arange(-radius, radius + 1, dtype=torch.float32)
    g = torch.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_kernel(sigma: float) -> torch.Tensor:
    """Normalized 2D Gaussian kernel of side 2*ceil(3*sigma) + 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    g = _kernel_1d(sigma)
    return torch.outer(g, g)


def _reflect_index(length: int, pad: int) -> torch.Tensor:
    # Mirror without repeating the edge sample, folding repeatedly so the
    # pad may exceed the axis length (torch's F.pad 'reflect' cannot).
    if length == 1:
        return torch.zeros(1 + 2 * pad, dtype=torch.long)
    pos = torch.arange(-pad, length + pad)
    period = 2 * (length - 1)
    q = pos.remainder(period)
    return torch.where(q > length - 1, period - q, q)


def smooth(image: torch.Tensor, sigma: float) -> torch.Tensor:
    """Blur a (B, C, H, W) tensor with a Gaussian of std `sigma` (pixels).

    Separable convolution with reflect padding; dims are preserved and the
    output stays within the input's value range.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if image.dim() != 4:
        raise ValueError(f"expected a (B, C, H, W) tensor, got {tuple(image.shape)}")
    g = _kernel_1d(sigma).to(image.dtype)
    radius = (g.numel() - 1) // 2
    _, c, h, w = image.shape
    padded = image.index_select(2, _reflect_index(h, radius))
    padded = padded.index_select(3, _reflect_index(w, radius))
    weight_v = g.view(1, 1, -1, 1).expand(c, 1, -1, 1)
    weight_h = g.view(1, 1, 1, -1).expand(c, 1, 1, -1)
    out = F.conv2d(padded, weight_v, groups=c)
    return F.conv2d(out, weight_h, groups=c)


def draw_sigma(spec: SmoothingSpec, rng: torch.Generator) -> float:
    """One std from U(sigma_min, sigma_max)."""
    u = torch.rand((), generator=rng).item()
    return spec.sigma_min + (spec.sigma_max - spec.sigma_min) * u


def sample_real(image: torch.Tensor, spec: SmoothingSpec, rng: torch.Generator) -> torch.Tensor:
    """Smooth with a std drawn fresh per call."""
    return smooth(image, draw_sigma(spec, rng))


def reconstruction_target(image: torch.Tensor, spec: SmoothingSpec) -> torch.Tensor:
    """The sigma_rec-smoothed target the reconstruction loss compares against."""
    return smooth(image, spec.sigma_rec_resolved)
