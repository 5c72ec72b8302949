#!/usr/bin/env python3
"""Regenerate the committed golden input/output pairs in tests/golden/.

The inputs are synthetic vessel-like images (deterministic seed); the
outputs pin down every operation's exact bytes so regressions and
platform drift show up as byte diffs.
"""

from pathlib import Path

import numpy as np

from veinview.clahe import ClaheConfig, apply_clahe
from veinview.frangi import FrangiConfig, frangi_multiscale
from veinview.grayscale import rgb_to_gray
from veinview.imgcore import ImageBuffer, VideoStream, write_image
from veinview.medianfilt import MedianConfig, median_filter
from veinview.pipeline import canonical_pipeline, run_pipeline

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def vessel_plane(h=96, w=96, seed=7):
    gen = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = 190.0 + 20.0 * np.sin(xx / 17.0) * np.cos(yy / 23.0)
    for amp, period, phase, thickness, depth in (
        (8.0, 29.0, 0.5, 2.2, 120.0),
        (12.0, 41.0, 2.1, 3.5, 90.0),
        (6.0, 19.0, 4.2, 1.6, 70.0),
    ):
        center = amp * np.sin(yy / period + phase) + w / 2.0 + (phase - 2.0) * 9.0
        dist = np.abs(xx - center)
        img -= depth * np.exp(-(dist**2) / (2.0 * thickness**2))
    img += gen.normal(0.0, 4.0, size=(h, w))
    return np.clip(np.round(img), 0, 255)


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    plane = vessel_plane()
    gray_in = ImageBuffer(plane.astype(np.uint8))

    rgb = np.stack([plane, 0.72 * plane + 30.0, 0.55 * plane + 18.0], axis=-1)
    rgb_in = ImageBuffer(np.clip(np.round(rgb), 0, 255).astype(np.uint8))

    write_image(gray_in, GOLDEN / "vessels.pgm")
    write_image(rgb_in, GOLDEN / "vessels.ppm")

    write_image(rgb_to_gray(rgb_in), GOLDEN / "gray.pgm")
    write_image(apply_clahe(gray_in, ClaheConfig(8, 8)), GOLDEN / "clahe_8x8.pgm")
    write_image(median_filter(gray_in, MedianConfig(5)), GOLDEN / "median_5.pgm")
    write_image(
        frangi_multiscale(gray_in, FrangiConfig(scales=(1.0, 2.0, 3.0, 4.0))).to_u8_buffer(),
        GOLDEN / "frangi_s1-4.pgm",
    )
    from fractions import Fraction

    stream = VideoStream(gray_in.width, gray_in.height, Fraction(1), frames=(gray_in,))
    enhanced, _ = run_pipeline(canonical_pipeline(input_channels=1), stream)
    write_image(enhanced.frames[0], GOLDEN / "enhance.pgm")
    print(f"wrote goldens to {GOLDEN}")


if __name__ == "__main__":
    main()
