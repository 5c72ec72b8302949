import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from veinview.imgcore import ImageBuffer, VideoStream


@pytest.fixture
def rng():
    return np.random.default_rng(20230817)


def make_gray(rng, h=32, w=32) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, (h, w), dtype=np.uint8))


def make_rgb(rng, h=32, w=32) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def make_stream(frames, fps=Fraction(30, 1)) -> VideoStream:
    first = frames[0]
    return VideoStream(width=first.width, height=first.height, fps=fps, frames=tuple(frames))


def synthetic_vessel_image(h=96, w=96, seed=7) -> ImageBuffer:
    """Bright tissue-like background with dark curved lines and mild noise."""
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
    return ImageBuffer(np.clip(np.round(img), 0, 255).astype(np.uint8))
