"""Self-attention block with fixed-size internal resolution.

Features are area-downsampled to a fixed m x m grid, key/query projections
(1x1 convs with optional channel reduction) produce pairwise similarity
logits, and the softmax-weighted downsampled features themselves (no value
projection) are upsampled back and passed through a 3x3 conv. The result is
added to the input with unit weight -- no learned mixing scalar -- so the
block is size-agnostic and starts near-identity with a zero-initialized
output conv bias.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .config import SAConfig


class SelfAttention(nn.Module):
    def __init__(self, channels: int, cfg: SAConfig):
        super().__init__()
        if channels < 1:
            raise ValueError(f"channels must be >= 1, got {channels}")
        self.m = cfg.m
        reduced = cfg.reduced_channels(channels)
        self.key = nn.Conv2d(channels, reduced, kernel_size=1)
        self.query = nn.Conv2d(channels, reduced, kernel_size=1)
        self.out_conv = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        nn.init.zeros_(self.out_conv.bias)

    def downsampled(self, features: torch.Tensor) -> torch.Tensor:
        """Area-pool the (B, C, H, W) input to the fixed (B, C, m, m) grid."""
        return F.adaptive_avg_pool2d(features, (self.m, self.m))

    def attention_rows(self, features: torch.Tensor) -> torch.Tensor:
        """Row-stochastic (B, m^2, m^2) attention; row i weights the
        contributions of every key position to query position i."""
        d = self.downsampled(features)
        k = self.key(d).flatten(2)      # (B, R, m^2)
        q = self.query(d).flatten(2)    # (B, R, m^2)
        logits = torch.einsum("bri,brj->bij", q, k)
        return F.softmax(logits, dim=-1)

    def attended(self, features: torch.Tensor) -> torch.Tensor:
        """Attention-reweighted downsampled features, (B, C, m, m)."""
        d = self.downsampled(features)
        rows = self.attention_rows(features)
        mixed = torch.einsum("bij,bcj->bci", rows, d.flatten(2))
        return mixed.reshape(d.shape)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.dim() != 4:
            raise ValueError(f"expected (B, C, H, W) features, got {tuple(features.shape)}")
        up = F.interpolate(self.attended(features), size=features.shape[-2:],
                           mode="bilinear", align_corners=False)
        return features + self.out_conv(up)
