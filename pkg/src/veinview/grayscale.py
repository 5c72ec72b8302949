"""Contrast-preserving RGB-to-gray conversion for NIR vessel imaging.

Plain luma conversion flattens the shadow structure that makes
subcutaneous vessels visible, so this module blends two signals instead:
the per-channel weighted averages (each channel pushed through the luma
weights and averaged) and the total chrominance (sum of the blue and red
projections).  The blend darkens the image by roughly 4x for achromatic
input; the downstream contrast stages are expected to restore range, or
``rescale=True`` restores it immediately.

All intermediate arithmetic is 64-bit floating point and quantization to
u8 happens exactly once at the end, which keeps the scalar reference path
and the vectorized image path bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import ImageBuffer

__all__ = ["GrayIntermediates", "gray_intermediates", "rgb_to_gray_pixel", "rgb_to_gray", "luma_u8"]

# Luma projection weights and the chrominance projection gains.
_WR, _WG, _WB = 0.299, 0.587, 0.114
_BLUE_GAIN, _RED_GAIN = 0.565, 0.713

# Per-channel lookup tables so the image path gathers instead of multiplying
# per pixel.  Every entry is produced by the same float64 operation, in the
# same order, as the scalar path, so the two stay bit-identical.
_VALUES = np.arange(256, dtype=np.float64)
_LUT_WR = _WR * _VALUES
_LUT_WG = _WG * _VALUES
_LUT_WB = _WB * _VALUES
_LUT_MEAN = ((_VALUES * _WR + _VALUES * _WG) + _VALUES * _WB) / 3.0
for _t in (_VALUES, _LUT_WR, _LUT_WG, _LUT_WB, _LUT_MEAN):
    _t.setflags(write=False)


@dataclass(frozen=True)
class GrayIntermediates:
    """Every intermediate of the conversion, for inspection and testing.

    ``gray`` is the real-valued result before clamping and rounding.
    """

    luma: float
    chroma_b: float
    chroma_r: float
    chroma_sum: float
    r_terms: tuple[float, float, float]
    g_terms: tuple[float, float, float]
    b_terms: tuple[float, float, float]
    r_mean: float
    g_mean: float
    b_mean: float
    gray: float


def gray_intermediates(
    r: float, g: float, b: float, *, blue_terms_from_green: bool = False
) -> GrayIntermediates:
    """Evaluate the conversion chain for one pixel.

    ``blue_terms_from_green`` reproduces a legacy formulation in which the
    second and third blue-channel terms are taken from the green channel
    instead of the blue one; kept as a compatibility mode only.
    """
    luma = _WR * r + _WG * g + _WB * b
    chroma_b = (b - luma) * _BLUE_GAIN
    chroma_r = (r - luma) * _RED_GAIN
    chroma_sum = chroma_b + chroma_r
    r_terms = (r * _WR, r * _WG, r * _WB)
    g_terms = (g * _WR, g * _WG, g * _WB)
    if blue_terms_from_green:
        b_terms = (b * _WR, g * _WG, g * _WB)
    else:
        b_terms = (b * _WR, b * _WG, b * _WB)
    r_mean = (r_terms[0] + r_terms[1] + r_terms[2]) / 3.0
    g_mean = (g_terms[0] + g_terms[1] + g_terms[2]) / 3.0
    b_mean = (b_terms[0] + b_terms[1] + b_terms[2]) / 3.0
    gray = ((r_mean + g_mean) + (b_mean + chroma_sum)) / 4.0
    return GrayIntermediates(
        luma=luma,
        chroma_b=chroma_b,
        chroma_r=chroma_r,
        chroma_sum=chroma_sum,
        r_terms=r_terms,
        g_terms=g_terms,
        b_terms=b_terms,
        r_mean=r_mean,
        g_mean=g_mean,
        b_mean=b_mean,
        gray=gray,
    )


def _quantize(x: float) -> int:
    """Clamp to [0, 255], then round to nearest with ties away from zero."""
    x = min(255.0, max(0.0, x))
    return int(math.floor(x + 0.5))


def rgb_to_gray_pixel(
    r: int, g: int, b: int, *, rescale: bool = False, blue_terms_from_green: bool = False
) -> int:
    """Convert one RGB triple to its gray level.

    The blend can go negative for saturated colors (strong green drives
    the chrominance sum far below zero), so the result is clamped to
    [0, 255] before rounding.  ``rescale`` multiplies by 4 before the
    clamp for callers that want display-range output directly.
    """
    gray = gray_intermediates(
        float(r), float(g), float(b), blue_terms_from_green=blue_terms_from_green
    ).gray
    if rescale:
        gray = gray * 4.0
    return _quantize(gray)


def rgb_to_gray(
    img: ImageBuffer, *, rescale: bool = False, blue_terms_from_green: bool = False
) -> ImageBuffer:
    """Convert a 3-channel u8 buffer to 1 channel, pixel by pixel.

    The output at (i, j) equals ``rgb_to_gray_pixel`` of the source pixel
    at (i, j); the implementation is vectorized but performs the exact
    same float64 operations in the same order.
    """
    if img.channels != 3:
        raise ValueError(f"rgb_to_gray requires a 3-channel buffer, got {img.channels}")
    if img.depth != "u8":
        raise ValueError("rgb_to_gray requires a u8 buffer")
    r = img.data[..., 0]
    g = img.data[..., 1]
    b = img.data[..., 2]

    luma = _LUT_WR[r] + _LUT_WG[g]
    luma += _LUT_WB[b]
    chroma_sum = _VALUES[b] - luma
    chroma_sum *= _BLUE_GAIN
    chroma_r = _VALUES[r] - luma
    chroma_r *= _RED_GAIN
    chroma_sum += chroma_r

    if blue_terms_from_green:
        gf = g.astype(np.float64)
        b_mean = b * _WR
        b_mean += gf * _WG
        b_mean += gf * _WB
        b_mean /= 3.0
    else:
        b_mean = _LUT_MEAN[b]

    gray = _LUT_MEAN[r] + _LUT_MEAN[g]
    tail = b_mean + chroma_sum
    gray += tail
    gray /= 4.0
    if rescale:
        gray *= 4.0
    np.clip(gray, 0.0, 255.0, out=gray)
    gray += 0.5
    np.floor(gray, out=gray)
    return ImageBuffer(gray.astype(np.uint8))


def luma_u8(rgb_data: np.ndarray) -> np.ndarray:
    """Rounded luma projection of interleaved u8 RGB samples.

    This is the brightness used for background thresholding; it is the
    plain luma, not the full gray blend.
    """
    y = _LUT_WR[rgb_data[..., 0]] + _LUT_WG[rgb_data[..., 1]]
    y += _LUT_WB[rgb_data[..., 2]]
    y += 0.5
    np.floor(y, out=y)
    return y.astype(np.uint8)
