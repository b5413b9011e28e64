#!/usr/bin/env python3
"""Write a synthetic landscape-style test image (sky gradient, bright disc,
textured ground) for quick desk-scale experiments."""

import argparse

import torch

from singen import image_io


def make_image(size: int, seed: int) -> torch.Tensor:
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


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output PNG path")
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()
    image_io.save_image(make_image(args.size, args.seed), args.out)
    print(f"wrote {args.out} ({args.size}x{args.size})")


if __name__ == "__main__":
    main()
