"""Per-scale generator and discriminator.

Both nets share the same fully-convolutional trunk (3x3 same-padding conv +
instance norm + LeakyReLU); the generator tail maps to a tanh-bounded
3-channel image, the discriminator tail to an unbounded 1-channel per-patch
score map of the same spatial size as its input. Attention blocks are
appended after the configured trunk positions at the k coarsest scales, in
both nets. Below the coarsest scale the generator consumes an extra input
channel carrying the upsampled score map of the previous scale's
discriminator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .attention import SelfAttention
from .config import ModelConfig, RunConfig, SAConfig


@dataclass
class FeedbackMap:
    """Per-patch discriminator scores, upsampled to the consuming scale."""

    scores: torch.Tensor  # (1, 1, H, W), raw unnormalized values
    source_scale: int


class ConvBlock(nn.Sequential):
    def __init__(self, in_channels: int, out_channels: int, slope: float):
        super().__init__(
            nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1),
            nn.InstanceNorm2d(out_channels, affine=True),
            nn.LeakyReLU(slope),
        )


def _trunk(in_channels: int, width: int, model_cfg: ModelConfig,
           sa_cfg: SAConfig | None, sa_layers: tuple[int, ...]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(model_cfg.num_blocks - 1):
        layers.append(ConvBlock(in_channels if i == 0 else width, width,
                                model_cfg.leaky_relu_slope))
        if sa_cfg is not None and i in sa_layers:
            layers.append(SelfAttention(width, sa_cfg))
    return nn.Sequential(*layers)


class ScaleGenerator(nn.Module):
    """Residual refiner for one scale; at the coarsest scale it maps noise
    straight to an image instead."""

    def __init__(self, width: int, model_cfg: ModelConfig, *, is_coarsest: bool,
                 expects_feedback: bool, sa_cfg: SAConfig | None = None,
                 sa_layers: tuple[int, ...] = ()):
        super().__init__()
        self.is_coarsest = is_coarsest
        self.expects_feedback = expects_feedback
        in_channels = 3 + (1 if expects_feedback else 0)
        self.trunk = _trunk(in_channels, width, model_cfg, sa_cfg, sa_layers)
        self.tail = nn.Sequential(
            nn.Conv2d(width, 3, kernel_size=3, padding=1),
            nn.Tanh(),
        )

    def forward(self, x: torch.Tensor, prior: torch.Tensor | None = None,
                feedback: torch.Tensor | None = None) -> torch.Tensor:
        """At the coarsest scale x is noise and the output is the tanh image.

        Below it, x is prior + noise_amp * noise; the tanh output is a
        residual added to `prior` and the sum is clamped to [-1, 1].
        """
        if self.is_coarsest:
            if prior is not None or feedback is not None:
                raise ValueError("coarsest-scale generator takes noise only")
            return self.tail(self.trunk(x))
        if prior is None:
            raise ValueError("generator below the coarsest scale requires a prior")
        if self.expects_feedback:
            if feedback is None:
                raise ValueError("generator expects a feedback map; none given")
            if feedback.shape[-2:] != x.shape[-2:] or feedback.shape[1] != 1:
                raise ValueError(
                    f"feedback shape {tuple(feedback.shape)} does not align with "
                    f"input {tuple(x.shape)}")
            x = torch.cat([x, feedback], dim=1)
        elif feedback is not None:
            raise ValueError("feedback given but this generator was built without it")
        residual = self.tail(self.trunk(x))
        return (prior + residual).clamp(-1.0, 1.0)


class ScaleDiscriminator(nn.Module):
    """Fully-convolutional critic emitting a same-size per-patch score map."""

    def __init__(self, width: int, model_cfg: ModelConfig, *,
                 sa_cfg: SAConfig | None = None, sa_layers: tuple[int, ...] = ()):
        super().__init__()
        self.min_input_size = model_cfg.min_input_size
        self.trunk = _trunk(3, width, model_cfg, sa_cfg, sa_layers)
        self.tail = nn.Conv2d(width, 1, kernel_size=3, padding=1)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if min(image.shape[-2:]) < self.min_input_size:
            raise ValueError(
                f"input {tuple(image.shape[-2:])} is below the receptive-field "
                f"minimum {self.min_input_size}")
        return self.tail(self.trunk(image))


@dataclass
class ScaleModel:
    """One scale's trainable pieces plus its noise amplitude."""

    scale_index: int
    generator: ScaleGenerator
    discriminator: ScaleDiscriminator
    noise_amp: float = 1.0
    has_sa: bool = False
    has_feedback: bool = False
    trained: bool = field(default=False, compare=False)

    def freeze(self) -> None:
        for net in (self.generator, self.discriminator):
            net.requires_grad_(False)
            net.eval()
        self.trained = True


def init_weights(module: nn.Module, rng: torch.Generator) -> None:
    """DCGAN-style init, drawn from an explicit generator for reproducibility."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            m.weight.data.normal_(0.0, 0.02, generator=rng)
            m.bias.data.zero_()
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            m.weight.data.normal_(1.0, 0.02, generator=rng)
            m.bias.data.zero_()


def sa_scales(coarsest_index: int, k: int) -> range:
    """Scale indices carrying attention: the k coarsest, N down to N-k+1."""
    return range(max(0, coarsest_index - k + 1), coarsest_index + 1)


def build_scale_model(scale_index: int, coarsest_index: int, cfg: RunConfig,
                      init_rng: torch.Generator | None = None) -> ScaleModel:
    has_sa = scale_index in sa_scales(coarsest_index, cfg.sa.k)
    is_coarsest = scale_index == coarsest_index
    has_feedback = (not is_coarsest) and cfg.model.feedback
    width = cfg.model.channels_at(scale_index, coarsest_index)
    sa_cfg = cfg.sa if has_sa else None
    sa_layers = cfg.sa.layer_indices if has_sa else ()
    generator = ScaleGenerator(width, cfg.model, is_coarsest=is_coarsest,
                               expects_feedback=has_feedback,
                               sa_cfg=sa_cfg, sa_layers=sa_layers)
    discriminator = ScaleDiscriminator(width, cfg.model, sa_cfg=sa_cfg,
                                       sa_layers=sa_layers)
    if init_rng is not None:
        init_weights(generator, init_rng)
        init_weights(discriminator, init_rng)
    return ScaleModel(scale_index=scale_index, generator=generator,
                      discriminator=discriminator, has_sa=has_sa,
                      has_feedback=has_feedback)


def spatial_noise(dims: tuple[int, int], rng: torch.Generator,
                  shared_across_channels: bool = False) -> torch.Tensor:
    """(1, 3, H, W) Gaussian noise; the coarsest scale uses one spatial map
    shared across channels."""
    h, w = dims
    if shared_across_channels:
        return torch.randn(1, 1, h, w, generator=rng).expand(1, 3, h, w)
    return torch.randn(1, 3, h, w, generator=rng)
