#!/usr/bin/env python3
"""A/B the cross-scale discriminator feedback: train twice (feedback on and
off, all else equal) and compare the reconstruction path's SIFID against the
training image."""

import argparse
import time

import singen
from singen import image_io
from singen.metrics import create_extractor


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("image", help="training image (PNG/JPEG)")
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--scales-cap", type=int, default=None)
    parser.add_argument("--extractor", default="random",
                        choices=("random", "inception", "auto"))
    args = parser.parse_args()

    image = image_io.load_image(args.image)
    extractor = create_extractor(args.extractor)
    scores = {}
    for feedback in (True, False):
        cfg = singen.RunConfig().replace(epochs=args.epochs, seed=args.seed,
                                         feedback=feedback,
                                         scales_cap=args.scales_cap)
        t0 = time.time()
        cascade = singen.train(image, cfg)
        score = singen.sifid(cascade.pyramid[0], cascade.state.x_rec[0], extractor)
        scores[feedback] = score
        print(f"feedback={feedback}: reconstruction SIFID {score:.6f} "
              f"({time.time() - t0:.0f}s)")
    print(f"ratio with/without: {scores[True] / scores[False]:.3f} "
          "(< 1 means feedback helped)")


if __name__ == "__main__":
    main()
