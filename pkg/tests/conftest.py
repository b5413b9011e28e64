import pytest
import torch

import singen


def synthetic_image(size: int = 64, seed: int = 11) -> torch.Tensor:
    """Deterministic landscape-like test image: sky gradient, a bright disc,
    textured ground, and mild noise. Shape (1, 3, size, size), range [-1, 1]."""
    g = torch.Generator().manual_seed(seed)
    y, x = torch.meshgrid(torch.linspace(-1, 1, size), torch.linspace(-1, 1, size),
                          indexing="ij")
    sky = 0.6 - 0.5 * y
    sun = torch.exp(-((x - 0.4) ** 2 + (y + 0.45) ** 2) / 0.03)
    ground = (y > 0.2).float() * (0.3 * torch.sin(9 * x) * torch.sin(7 * y) - 0.2)
    base = torch.stack([sky + 0.8 * sun,
                        0.5 * sky + 0.6 * sun + 0.3 * ground,
                        0.3 * sky + ground])
    tex = 0.08 * torch.randn(3, size, size, generator=g)
    return (base + tex).clamp(-1.0, 1.0).unsqueeze(0)


def smooth_image(size: int = 96) -> torch.Tensor:
    """Noise-free low-frequency image built from cosine modes (zero normal
    derivative at the borders, so reflect padding continues it smoothly)."""
    i = torch.arange(size, dtype=torch.float32)
    c1 = torch.cos(torch.pi * 1 * i / (size - 1))
    c2 = torch.cos(torch.pi * 2 * i / (size - 1))
    c3 = torch.cos(torch.pi * 3 * i / (size - 1))
    chans = [0.5 * torch.outer(c1, c2), 0.4 * torch.outer(c2, c1) + 0.2,
             0.3 * torch.outer(c3, c3) - 0.1]
    return torch.stack(chans).unsqueeze(0)


@pytest.fixture(scope="session")
def toy_cascade():
    """A small but genuinely trained 3-scale run shared by behavioral tests."""
    image = synthetic_image(44, seed=11)
    cfg = singen.RunConfig().replace(epochs=120, seed=5)
    records = []
    cascade = singen.train(image, cfg, log=records.append)
    cascade.log_records = records
    cascade.source_image = image
    return cascade
