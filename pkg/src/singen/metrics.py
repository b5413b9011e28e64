"""Single-image Fréchet distance and sample-diversity measurement.

SIFID treats each spatial position of a deep feature map as one sample and
compares the Gaussian statistics of a real and a generated image. Feature
extraction defaults to a fixed-seed random conv stack so results are
reproducible offline; a pretrained-inception backend (features taken before
the configured pooling layer) is available when its weights are present.

Diversity is the per-pixel, per-channel std over a set of generated images,
averaged to a scalar; the normalized variant divides by the mean pixel value
of the real image. Inputs are used as-is, so pass [0, 1]-domain arrays when
the conventional pixel-unit scores are wanted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

_JITTER = 1e-6


def _prepare_cov(cov: np.ndarray) -> np.ndarray:
    # Symmetrize; add the epsilon ridge only when the matrix actually needs
    # it, so well-conditioned inputs keep closed-form accuracy.
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    cov = (cov + cov.T) / 2.0
    if np.linalg.eigvalsh(cov).min() < _JITTER:
        cov = cov + _JITTER * np.eye(cov.shape[0])
    return cov


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_distance(mu1, cov1, mu2, cov2) -> float:
    """||mu1-mu2||^2 + tr(cov1 + cov2 - 2 (cov1 cov2)^(1/2)).

    The cross term is evaluated through the eigendecomposition of the
    symmetric matrix sqrt(cov1) cov2 sqrt(cov1), with eigenvalues clamped
    at zero.
    """
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    cov1, cov2 = _prepare_cov(cov1), _prepare_cov(cov2)
    for name, arr in (("mu1", mu1), ("cov1", cov1), ("mu2", mu2), ("cov2", cov2)):
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
    root1 = _sqrt_psd(cov1)
    inner = root1 @ cov2 @ root1
    inner = (inner + inner.T) / 2.0
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None)).sum()
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * cross)


class FeatureExtractor:
    """Deterministic map from a (1, 3, H, W) image in [-1, 1] to a (F, H', W')
    feature tensor."""

    def __init__(self, net: nn.Module, feature_dim: int, name: str):
        self.net = net.eval()
        self.net.requires_grad_(False)
        self.feature_dim = feature_dim
        self.name = name

    @torch.no_grad()
    def __call__(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or image.shape[0] != 1:
            raise ValueError(f"expected a (1, C, H, W) image, got {tuple(image.shape)}")
        return self.net(image)[0]


def random_projection_extractor(seed: int = 1234) -> FeatureExtractor:
    """Hermetic fallback backend: a small fixed-seed random conv stack."""
    rng = torch.Generator().manual_seed(seed)
    net = nn.Sequential(
        nn.Conv2d(3, 32, kernel_size=3, stride=1, padding=1),
        nn.LeakyReLU(0.2),
        nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
        nn.LeakyReLU(0.2),
        nn.Conv2d(64, 64, kernel_size=3, stride=1, padding=1),
    )
    for m in net.modules():
        if isinstance(m, nn.Conv2d):
            m.weight.data.normal_(0.0, 0.5, generator=rng)
            m.bias.data.zero_()
    return FeatureExtractor(net, feature_dim=64, name=f"random-{seed}")


def inception_extractor(pool_index: int = 2) -> FeatureExtractor:
    """Pretrained-inception backend tapping features before the
    `pool_index`-th max-pooling layer (1 -> 64-dim, 2 -> 192-dim).

    Requires torchvision and a downloadable/cached weight file.
    """
    if pool_index not in (1, 2):
        raise ValueError(f"pool_index must be 1 or 2, got {pool_index}")
    try:
        from torchvision import models as tv_models
    except ImportError as exc:
        raise RuntimeError("the inception backend requires torchvision") from exc
    try:
        weights = tv_models.Inception_V3_Weights.IMAGENET1K_V1
        base = tv_models.inception_v3(weights=weights, aux_logits=True)
    except Exception as exc:
        raise RuntimeError(
            "could not load pretrained inception weights (offline?); "
            "use the 'random' backend instead") from exc
    stem = [base.Conv2d_1a_3x3, base.Conv2d_2a_3x3, base.Conv2d_2b_3x3]
    dim = 64
    if pool_index == 2:
        stem += [base.maxpool1, base.Conv2d_3b_1x1, base.Conv2d_4a_3x3]
        dim = 192

    class _Wrapped(nn.Module):
        def __init__(self):
            super().__init__()
            self.stem = nn.Sequential(*stem)

        def forward(self, x):
            # inception expects ImageNet-normalized inputs
            x = (x + 1.0) / 2.0
            mean = x.new_tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
            std = x.new_tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
            return self.stem((x - mean) / std)

    return FeatureExtractor(_Wrapped(), feature_dim=dim, name=f"inception-pool{pool_index}")


def create_extractor(backend: str = "random", **kwargs) -> FeatureExtractor:
    if backend == "random":
        return random_projection_extractor(**kwargs)
    if backend == "inception":
        return inception_extractor(**kwargs)
    if backend == "auto":
        try:
            return inception_extractor(**kwargs)
        except RuntimeError as exc:
            warnings.warn(f"falling back to the random backend: {exc}")
            return random_projection_extractor()
    raise ValueError(f"unknown extractor backend {backend!r}")


def _feature_stats(features: torch.Tensor, feature_dim: int) -> tuple[np.ndarray, np.ndarray]:
    flat = features.reshape(features.shape[0], -1).T.numpy().astype(np.float64)
    if flat.shape[0] < feature_dim + 1:
        warnings.warn(
            f"only {flat.shape[0]} spatial positions for {feature_dim}-dim features; "
            "covariance is rank-deficient and will be jittered")
    return flat.mean(axis=0), np.cov(flat, rowvar=False)


def sifid(real_image: torch.Tensor, fake_image: torch.Tensor,
          extractor: FeatureExtractor) -> float:
    """Fréchet distance between the two images' deep-feature statistics;
    lower means the generated image better matches the real patch statistics."""
    if real_image.shape != fake_image.shape:
        raise ValueError(f"image shapes must match, got {tuple(real_image.shape)} "
                         f"vs {tuple(fake_image.shape)}")
    mu_r, cov_r = _feature_stats(extractor(real_image), extractor.feature_dim)
    mu_f, cov_f = _feature_stats(extractor(fake_image), extractor.feature_dim)
    return max(0.0, frechet_distance(mu_r, cov_r, mu_f, cov_f))


@dataclass
class DiversityReport:
    std_map: torch.Tensor  # (C, H, W) per-pixel per-channel std over samples
    scalar: float
    normalized: float


def diversity(samples: list[torch.Tensor], real_image: torch.Tensor) -> DiversityReport:
    """Population std over the sample axis, per pixel and channel, averaged."""
    if len(samples) < 2:
        raise ValueError(f"diversity needs at least 2 samples, got {len(samples)}")
    shapes = {tuple(s.shape) for s in samples}
    if len(shapes) != 1:
        raise ValueError(f"samples must share one shape, got {sorted(shapes)}")
    stack = torch.stack([s[0] if s.dim() == 4 else s for s in samples]).float()
    std_map = stack.std(dim=0, unbiased=False)
    scalar = std_map.mean().item()
    mean_real = real_image.float().mean().item()
    normalized = scalar / mean_real if mean_real != 0 else float("inf")
    return DiversityReport(std_map=std_map, scalar=scalar, normalized=normalized)
