"""Scale geometry and the real-image pyramid.

Images are float32 tensors of shape (1, 3, H, W) with values in [-1, 1].
Level 0 of a pyramid is the finest (original resolution, possibly capped to
max_size); level N is the coarsest. Downsampling uses anti-aliased area
resampling, upsampling is bilinear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .config import ConfigError, PyramidConfig

Dims = tuple[int, int]


def _round_half_down(x: float) -> int:
    # Ties round down so the shrink sequence never re-grows past the exact
    # geometric one (e.g. 250 * 0.75 = 187.5 -> 187).
    return int(math.ceil(x - 0.5))


def plan_scales(image_dims: Dims, cfg: PyramidConfig) -> list[Dims]:
    """Level dims from finest to coarsest for an image of `image_dims`.

    The first entry is the input dims scaled down (if needed) so the longer
    side is at most cfg.max_size; each following entry shrinks per-axis by
    cfg.scale_factor_r with half-down rounding, stopping before the shorter
    side would fall below cfg.min_size.
    """
    h, w = image_dims
    if min(h, w) < cfg.min_size:
        raise ConfigError(
            f"image {h}x{w} is smaller than min_size={cfg.min_size} on its shorter side")
    if max(h, w) > cfg.max_size:
        s = cfg.max_size / max(h, w)
        h, w = _round_half_down(h * s), _round_half_down(w * s)
    dims = [(h, w)]
    while True:
        h, w = _round_half_down(h * cfg.scale_factor_r), _round_half_down(w * cfg.scale_factor_r)
        if min(h, w) < cfg.min_size:
            break
        dims.append((h, w))
    if len(dims) < 2:
        raise ConfigError(
            f"image {image_dims} yields a single scale; need at least 2 "
            f"(min_size={cfg.min_size}, scale_factor_r={cfg.scale_factor_r})")
    if cfg.scales_cap is not None:
        dims = dims[: cfg.scales_cap]
    return dims


def _check_image(image: torch.Tensor) -> None:
    if image.dim() != 4 or image.shape[0] != 1 or image.shape[1] != 3:
        raise ValueError(f"expected image of shape (1, 3, H, W), got {tuple(image.shape)}")


def resize(image: torch.Tensor, target_dims: Dims, mode: str) -> torch.Tensor:
    """Resize to exactly `target_dims`; mode is 'bilinear' or 'area'."""
    th, tw = target_dims
    if th < 1 or tw < 1:
        raise ValueError(f"target dims must be >= 1x1, got {target_dims}")
    if image.dim() != 4:
        raise ValueError(f"expected a (B, C, H, W) tensor, got {tuple(image.shape)}")
    if mode not in ("bilinear", "area"):
        raise ValueError(f"mode must be 'bilinear' or 'area', got {mode!r}")
    if tuple(image.shape[-2:]) == (th, tw):
        return image.clone()
    if mode == "bilinear":
        return F.interpolate(image, size=(th, tw), mode="bilinear", align_corners=False)
    return F.interpolate(image, size=(th, tw), mode="area")


def upsample(image: torch.Tensor, target_dims: Dims) -> torch.Tensor:
    """Bilinear resize; the scale-to-scale (and feedback) upsampling path."""
    return resize(image, target_dims, mode="bilinear")


def resample(image: torch.Tensor, target_dims: Dims) -> torch.Tensor:
    """Resize picking the mode by direction: anti-aliased area when shrinking
    on both axes, bilinear otherwise."""
    h, w = image.shape[-2:]
    shrinking = target_dims[0] <= h and target_dims[1] <= w
    return resize(image, target_dims, mode="area" if shrinking else "bilinear")


@dataclass
class ImagePyramid:
    """Ordered list of images, index 0 = finest, index -1 = coarsest."""

    levels: list[torch.Tensor]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> torch.Tensor:
        return self.levels[i]

    @property
    def coarsest_index(self) -> int:
        return len(self.levels) - 1

    def dims(self, i: int) -> Dims:
        return tuple(self.levels[i].shape[-2:])

    def all_dims(self) -> list[Dims]:
        return [self.dims(i) for i in range(len(self.levels))]


def build_pyramid(image: torch.Tensor, cfg: PyramidConfig) -> ImagePyramid:
    """Build the real-image pyramid for a (1, 3, H, W) image in [-1, 1].

    Level 0 equals the (possibly max_size-capped) input; deeper levels are
    area-resampled from level 0 so each level matches plan_scales exactly.
    """
    _check_image(image)
    if image.min() < -1.0 - 1e-6 or image.max() > 1.0 + 1e-6:
        raise ValueError("image values must lie in [-1, 1]")
    dims = plan_scales(tuple(image.shape[-2:]), cfg)
    finest = resize(image, dims[0], mode="area")
    levels = [finest] + [resize(finest, d, mode="area") for d in dims[1:]]
    return ImagePyramid(levels)
