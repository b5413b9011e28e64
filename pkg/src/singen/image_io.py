"""PNG read/write with the affine mapping between 8-bit and [-1, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image


def load_image(path: str | Path) -> torch.Tensor:
    """Read a PNG/JPEG into a (1, 3, H, W) float32 tensor in [-1, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32)
    chw = torch.from_numpy(arr).permute(2, 0, 1) / 127.5 - 1.0
    return chw.unsqueeze(0)


def save_image(image: torch.Tensor, path: str | Path) -> None:
    """Write a (1, 3, H, W) tensor in [-1, 1] as an 8-bit PNG."""
    if image.dim() != 4 or image.shape[0] != 1:
        raise ValueError(f"expected a (1, C, H, W) tensor, got {tuple(image.shape)}")
    arr = ((image[0].clamp(-1.0, 1.0) + 1.0) * 127.5).round().to(torch.uint8)
    Image.fromarray(arr.permute(1, 2, 0).numpy()).save(path)


def save_grayscale(map2d: torch.Tensor, path: str | Path) -> None:
    """Write a single-channel map as a min-max normalized grayscale PNG."""
    arr = map2d.detach().float()
    if arr.dim() != 2:
        raise ValueError(f"expected a 2D map, got {tuple(arr.shape)}")
    lo, hi = arr.min(), arr.max()
    scaled = (arr - lo) / (hi - lo) if hi > lo else torch.zeros_like(arr)
    Image.fromarray((scaled * 255.0).round().to(torch.uint8).numpy(), mode="L").save(path)
