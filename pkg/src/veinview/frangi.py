"""Multiscale vesselness filtering via Hessian eigenvalue analysis.

At each scale the image is convolved with Gaussian second-derivative
kernels (separable, replicate borders) to produce a per-pixel 2x2
Hessian, normalized by sigma^2 so responses are comparable across scales.
The eigenvalues, ordered by magnitude, classify local structure: a ridge
has one strong negative eigenvalue (across the vessel) and one weak
eigenvalue (along it).  The vesselness score combines a blob penalty
(eigenvalue magnitude ratio) with a background gate (Hessian norm) and
lies in [0, 1]; the multiscale result is the per-pixel maximum over the
scale set, with the winning scale recorded.

This is the 2-D specialization: the plate discriminator used by 3-D
volumetric variants has no meaning for flat images and is omitted, and
``alpha`` is carried in the config only for forward compatibility.
Vessels darker than their surroundings (the NIR imaging case) are handled
by negating the input so they become bright ridges; bright-structure
input with ``dark_vessels=True`` is suppressed by the sign gate.

Tube rendering is an offline step: it is excluded from the real-time
pipeline recipe and driven through its own CLI/service surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .imgcore import ImageBuffer

__all__ = [
    "FrangiConfig",
    "HessianField",
    "EigenPair",
    "VesselnessMap",
    "hessian_at_scale",
    "eigen2x2",
    "vesselness_at_scale",
    "frangi_multiscale",
]

DEFAULT_SCALES = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)

# Eigenvalues below this magnitude are treated as background (avoids 0/0
# in the ratio term on constant regions).
_EIGEN_EPS = 1e-12


@dataclass(frozen=True)
class FrangiConfig:
    """Scale set and sensitivity parameters.

    ``c`` is the background sensitivity: an absolute value, or ``"auto"``
    for half the maximum Hessian Frobenius norm over the image at each
    scale.  ``alpha`` is accepted for config compatibility but unused in
    2-D (it discriminates plates from tubes, a 3-D concept).
    """

    scales: tuple[float, ...] = DEFAULT_SCALES
    alpha: float = 0.5
    beta: float = 0.5
    c: float | str = "auto"
    dark_vessels: bool = True

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        if not scales:
            raise ValueError("scale list must not be empty")
        if any(s <= 0 for s in scales):
            raise ValueError("scales must be positive")
        if any(b >= a for a, b in zip(scales[1:], scales)):
            raise ValueError("scales must be strictly increasing")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if isinstance(self.c, str):
            if self.c != "auto":
                raise ValueError(f"c must be a positive number or 'auto', got {self.c!r}")
        elif not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")


@dataclass(frozen=True)
class HessianField:
    """Per-pixel symmetric 2x2 Hessian at one scale, as float32 planes.

    The off-diagonal plane is stored once; symmetry is structural.
    """

    hxx: np.ndarray
    hxy: np.ndarray
    hyy: np.ndarray
    sigma: float


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues of a symmetric 2x2 matrix ordered by magnitude."""

    lambda1: float  # |lambda1| <= |lambda2|
    lambda2: float


@dataclass(frozen=True)
class VesselnessMap:
    """Vesselness scores in [0, 1] plus the winning scale per pixel."""

    values: np.ndarray  # float32 plane
    scales: tuple[float, ...]
    argmax_index: np.ndarray | None = None  # int16 index into ``scales``

    def to_u8_buffer(self) -> ImageBuffer:
        """Quantize scores to u8: round(v * 255), ties away from zero."""
        scaled = self.values.astype(np.float64) * 255.0
        return ImageBuffer(np.floor(np.clip(scaled, 0.0, 255.0) + 0.5).astype(np.uint8))


def _as_float_plane(img) -> np.ndarray:
    """Accept an ImageBuffer (u8 scaled to [0,1]) or a raw 2-D float array."""
    if isinstance(img, ImageBuffer):
        if img.channels != 1:
            raise ValueError("expected a 1-channel image")
        if img.depth == "u8":
            return img.data.astype(np.float64) / 255.0
        return img.data.astype(np.float64)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {arr.shape}")
    return arr


def _derivative_kernels(sigma: float):
    """Sampled Gaussian, first- and second-derivative kernels, calibrated.

    Truncation at radius ceil(4*sigma) perturbs the discrete moments, so
    each kernel is corrected to reproduce its defining response exactly:
    the smoother sums to 1, the first derivative maps a unit ramp to 1,
    and the second derivative has zero DC and maps x^2 to 2.
    """
    radius = int(np.ceil(4.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    gauss = np.exp(-(t * t) / (2.0 * sigma * sigma))
    g0 = gauss / gauss.sum()
    g1 = -t / (sigma * sigma) * gauss
    g1 /= np.sum(-t * g1)
    g2 = (t * t - sigma * sigma) / sigma**4 * gauss
    g2 -= g2.mean()
    g2 /= np.sum(t * t * g2) / 2.0
    return g0, g1, g2


def hessian_at_scale(img, sigma: float) -> HessianField:
    """Scale-normalized Gaussian Hessian of a 1-channel image.

    Convolves with second-derivative-of-Gaussian kernels (separable,
    replicate borders, kernel radius ceil(4*sigma)) and multiplies by
    sigma^2 so the multiscale maximum is meaningful.  ``img`` may be an
    ImageBuffer or a raw 2-D float array (used as-is).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    plane = _as_float_plane(img)
    g0, g1, g2 = _derivative_kernels(sigma)
    s2 = sigma * sigma

    def conv(rows_kernel, cols_kernel):
        tmp = convolve1d(plane, cols_kernel, axis=1, mode="nearest")
        return convolve1d(tmp, rows_kernel, axis=0, mode="nearest")

    hxx = conv(g0, g2) * s2
    hyy = conv(g2, g0) * s2
    hxy = conv(g1, g1) * s2
    return HessianField(
        hxx=hxx.astype(np.float32),
        hxy=hxy.astype(np.float32),
        hyy=hyy.astype(np.float32),
        sigma=float(sigma),
    )


def _eigen_planes(hxx, hxy, hyy):
    """Closed-form eigenvalues of symmetric 2x2 fields, magnitude ordered."""
    mean = 0.5 * (hxx + hyy)
    diff = 0.5 * (hxx - hyy)
    root = np.sqrt(diff * diff + hxy * hxy)
    plus = mean + root
    minus = mean - root
    # on magnitude ties the positive eigenvalue is lambda1
    swap = np.abs(plus) > np.abs(minus)
    lam1 = np.where(swap, minus, plus)
    lam2 = np.where(swap, plus, minus)
    return lam1, lam2


def eigen2x2(hxx: float, hxy: float, hyy: float) -> EigenPair:
    """Eigenvalues of one symmetric 2x2 matrix, ordered by magnitude.

    Uses the closed form m +/- sqrt(d^2 + hxy^2) with m the mean and d the
    half-difference of the diagonal; ties in magnitude put the positive
    eigenvalue first, which fixes the order deterministically.
    """
    lam1, lam2 = _eigen_planes(
        np.float64(hxx), np.float64(hxy), np.float64(hyy)
    )
    return EigenPair(lambda1=float(lam1), lambda2=float(lam2))


def _vesselness_values(plane: np.ndarray, sigma: float, cfg: FrangiConfig) -> np.ndarray:
    work = -plane if cfg.dark_vessels else plane
    field = hessian_at_scale(work, sigma)
    lam1, lam2 = _eigen_planes(
        field.hxx.astype(np.float64), field.hxy.astype(np.float64), field.hyy.astype(np.float64)
    )
    norm2 = lam1 * lam1 + lam2 * lam2  # squared Hessian Frobenius norm
    if cfg.c == "auto":
        c = 0.5 * float(np.sqrt(norm2.max()))
        if c <= 0.0:
            c = 1.0
    else:
        c = float(cfg.c)
    background = np.abs(lam2) < _EIGEN_EPS
    safe_lam2 = np.where(background, 1.0, lam2)
    ratio2 = (lam1 / safe_lam2) ** 2
    values = np.exp(-ratio2 / (2.0 * cfg.beta * cfg.beta)) * (
        1.0 - np.exp(-norm2 / (2.0 * c * c))
    )
    values[(lam2 >= 0.0) | background] = 0.0
    return values


def vesselness_at_scale(img, sigma: float, cfg: FrangiConfig) -> VesselnessMap:
    """Single-scale vesselness in [0, 1].

    Dark-vessel mode negates the input first, so vessels become bright
    ridges; pixels whose stronger eigenvalue is non-negative (wrong
    polarity) or negligibly small (background) score zero.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    values = _vesselness_values(_as_float_plane(img), sigma, cfg)
    return VesselnessMap(values=values.astype(np.float32), scales=(float(sigma),))


def frangi_multiscale(img, cfg: FrangiConfig) -> VesselnessMap:
    """Per-pixel maximum of single-scale vesselness over ``cfg.scales``.

    The recorded winner is the lowest scale index achieving the maximum.
    Scales are independent and the maximum is order-free, so this is
    trivially parallel; the implementation processes scales sequentially
    to bound memory.
    """
    plane = _as_float_plane(img)
    best = None
    best_idx = None
    for idx, sigma in enumerate(cfg.scales):
        values = _vesselness_values(plane, sigma, cfg)
        if best is None:
            best = values
            best_idx = np.zeros(plane.shape, dtype=np.int16)
        else:
            better = values > best
            best = np.where(better, values, best)
            best_idx[better] = idx
    return VesselnessMap(
        values=best.astype(np.float32),
        scales=cfg.scales,
        argmax_index=best_idx,
    )
