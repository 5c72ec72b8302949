"""Neighborhood median filtering for impulse-like noise (hair, speckle).

Each output pixel is the median of the k x k window centered on it, with
edges replicated so border tiles are not biased dark for the contrast
stages that follow.  With odd k the window always holds an odd number of
samples, so the median is unique and the filter is an exact selection:
every output value is a member of its input window.

The fast path is OpenCV's histogram-based median, which matches a naive
per-pixel sort exactly for u8 input; the naive path lives in the test
suite as the oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .imgcore import ImageBuffer

__all__ = ["MedianConfig", "median_filter"]


@dataclass(frozen=True)
class MedianConfig:
    """Window side length; must be odd.  Border policy is replicate-edge."""

    window: int = 5

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"median window must be odd and >= 1, got {self.window}")


def median_filter(img: ImageBuffer, cfg: MedianConfig) -> ImageBuffer:
    """Median-filter a 1-channel u8 buffer with replicate borders."""
    if img.channels != 1 or img.depth != "u8":
        raise ValueError("median_filter requires a 1-channel u8 buffer")
    if cfg.window == 1:
        return img
    # cv2.medianBlur replicates edges for u8 input, matching our border policy
    out = cv2.medianBlur(np.ascontiguousarray(img.data), cfg.window)
    return ImageBuffer(out)
