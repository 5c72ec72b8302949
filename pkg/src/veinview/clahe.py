"""Contrast-limited adaptive histogram equalization (CLAHE).

The image is divided into a grid of tiles; each tile gets a clipped
histogram and a CDF-based gray-level mapping.  Output pixels blend the
mappings of the tiles whose centers bound them: pixels surrounded by four
centers blend all four bilinearly (inner case), pixels outside the center
range along one axis blend the two neighbors on the other axis (border
case), and pixels outside along both axes take the nearest tile's mapping
unchanged (corner case).  Tiles themselves are classified corner/border/
inner by their grid position; per-pixel behavior follows from which
quadrant of its tile a pixel falls in.

The blend is evaluated in exact integer arithmetic (distances are kept in
doubled pixel units so half-pixel tile centers stay integral), which makes
the result deterministic across platforms and bit-identical to a direct
per-pixel evaluation of the blending formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .imgcore import ImageBuffer

__all__ = [
    "ClaheConfig",
    "RegionClass",
    "TileGrid",
    "InterpWeights",
    "parse_grid",
    "clip_histogram",
    "build_tile_mappings",
    "interp_weights",
    "apply_clahe",
]


def parse_grid(text: str) -> tuple[int, int]:
    """Parse a ``"COLSxROWS"`` grid string such as ``"8x8"``."""
    try:
        cols, rows = text.lower().split("x")
        return int(cols), int(rows)
    except ValueError:
        raise ValueError(f"grid must look like '8x8', got {text!r}") from None


@dataclass(frozen=True)
class ClaheConfig:
    """Tiling geometry and clipping strength.

    ``clip_limit`` is a multiple of the uniform bin height (tile pixel
    count / bin count), so the same value behaves consistently across tile
    sizes.  A 1x1 grid degenerates to global clipped equalization.
    """

    grid_cols: int = 8
    grid_rows: int = 8
    clip_limit: float = 2.0
    n_bins: int = 256

    def __post_init__(self):
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.grid_cols}x{self.grid_rows}")
        if not self.clip_limit > 0:
            raise ValueError(f"clip_limit must be positive, got {self.clip_limit}")
        if not 2 <= self.n_bins <= 256:
            raise ValueError(f"n_bins must be in [2, 256], got {self.n_bins}")

    @property
    def grid(self) -> tuple[int, int]:
        return (self.grid_cols, self.grid_rows)


class RegionClass(IntEnum):
    CORNER = 0
    BORDER = 1
    INNER = 2


@dataclass(frozen=True)
class TileGrid:
    """Per-tile mappings plus the geometry needed to interpolate them.

    ``luts`` has shape (grid_rows, grid_cols, n_bins) and maps histogram
    bin index to an output level in [0, 255]; every mapping is
    non-decreasing.  ``centers_x2`` / ``centers_y2`` hold tile centers in
    doubled pixel units.  The last tile on each axis absorbs the division
    remainder, and centers are computed from actual tile extents.
    """

    config: ClaheConfig
    x_starts: np.ndarray  # (grid_cols + 1,) tile column boundaries
    y_starts: np.ndarray  # (grid_rows + 1,)
    luts: np.ndarray  # (grid_rows, grid_cols, n_bins) uint8
    classes: np.ndarray  # (grid_rows, grid_cols) RegionClass values
    centers_x2: np.ndarray  # (grid_cols,) area centers, doubled pixel units
    centers_y2: np.ndarray  # (grid_rows,)

    def region_counts(self) -> dict[RegionClass, int]:
        return {rc: int(np.count_nonzero(self.classes == rc)) for rc in RegionClass}


@dataclass(frozen=True)
class InterpWeights:
    """Blend geometry for one pixel: bounding tiles, distances, weights.

    Distances are measured to the bounding tile centers along each axis
    (doubled units); on each axis the two distances sum to the inter-center
    span.  ``weights`` orders the four factors as (low-low, low-high,
    high-low, high-high) in (row, column) tile order and always sums to 1.
    """

    tile_x_low: int
    tile_x_high: int
    tile_y_low: int
    tile_y_high: int
    dist_x_low: int  # doubled distance from pixel to the low-x center
    dist_x_high: int
    dist_y_low: int
    dist_y_high: int
    weights: tuple[float, float, float, float]


def _bin_index(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Histogram bin of each u8 value; identity when n_bins == 256."""
    if n_bins == 256:
        return values
    return (values.astype(np.int32) * n_bins) >> 8


def clip_histogram(hist: np.ndarray, clip_limit: float, n_pixels: int) -> np.ndarray:
    """Clip a histogram and redistribute the excess uniformly.

    The absolute limit is ``max(1, round(clip_limit * n_pixels / n_bins))``
    with ties rounded away from zero.  Every bin receives an equal share of
    the excess; the remainder goes one count each to the lowest-indexed
    bins.  The total count is conserved, and a bin may end up marginally
    above the limit after redistribution (single pass, deterministic).
    """
    hist = np.asarray(hist, dtype=np.int64)
    n_bins = hist.shape[0]
    limit = max(1, int(np.floor(clip_limit * n_pixels / n_bins + 0.5)))
    excess = int(np.maximum(hist - limit, 0).sum())
    clipped = np.minimum(hist, limit)
    clipped += excess // n_bins
    clipped[: excess % n_bins] += 1
    return clipped


def _tile_starts(extent: int, tiles: int) -> np.ndarray:
    base = extent // tiles
    starts = np.arange(tiles + 1, dtype=np.int64) * base
    starts[tiles] = extent  # last tile absorbs the remainder
    return starts


@lru_cache(maxsize=16)
def _grid_geometry(width: int, height: int, grid_cols: int, grid_rows: int):
    """Geometry shared by every image of one size: starts, centers, classes."""
    x_starts = _tile_starts(width, grid_cols)
    y_starts = _tile_starts(height, grid_rows)
    # area center of tile [a, b) is (a + b) / 2; doubled units keep it integral
    centers_x2 = x_starts[:-1] + x_starts[1:]
    centers_y2 = y_starts[:-1] + y_starts[1:]
    col_edge = (np.arange(grid_cols) == 0) | (np.arange(grid_cols) == grid_cols - 1)
    row_edge = (np.arange(grid_rows) == 0) | (np.arange(grid_rows) == grid_rows - 1)
    classes = np.full((grid_rows, grid_cols), int(RegionClass.INNER), dtype=np.uint8)
    classes[row_edge, :] = np.where(col_edge, RegionClass.CORNER, RegionClass.BORDER)
    classes[:, col_edge] = np.where(row_edge, RegionClass.CORNER, RegionClass.BORDER)[:, None]
    for a in (x_starts, y_starts, centers_x2, centers_y2, classes):
        a.setflags(write=False)
    return x_starts, y_starts, centers_x2, centers_y2, classes


def build_tile_mappings(img: ImageBuffer, cfg: ClaheConfig) -> TileGrid:
    """Histogram, clip, and map every tile of a 1-channel u8 image."""
    if img.channels != 1 or img.depth != "u8":
        raise ValueError("CLAHE requires a 1-channel u8 buffer")
    gx, gy = cfg.grid_cols, cfg.grid_rows
    if img.width < gx or img.height < gy:
        raise ValueError(
            f"image {img.width}x{img.height} is smaller than the {gx}x{gy} grid"
        )
    x_starts, y_starts, centers_x2, centers_y2, classes = _grid_geometry(
        img.width, img.height, gx, gy
    )
    n_bins = cfg.n_bins

    # One bincount over (tile id, bin) pairs builds every histogram at once.
    col_tile = np.repeat(np.arange(gx, dtype=np.int32), np.diff(x_starts))
    row_tile = np.repeat(np.arange(gy, dtype=np.int32), np.diff(y_starts))
    tile_of = row_tile[:, None] * gx + col_tile[None, :]
    bins = _bin_index(img.data, n_bins).astype(np.int32)
    flat = (tile_of * n_bins + bins).ravel()
    hists = np.bincount(flat, minlength=gx * gy * n_bins).reshape(gy, gx, n_bins)

    n_pix = (np.diff(y_starts)[:, None] * np.diff(x_starts)[None, :]).astype(np.int64)
    limit = np.maximum(1, np.floor(cfg.clip_limit * n_pix / n_bins + 0.5)).astype(np.int64)
    excess = np.maximum(hists - limit[..., None], 0).sum(axis=2)
    clipped = np.minimum(hists, limit[..., None])
    clipped += (excess // n_bins)[..., None]
    clipped += np.arange(n_bins)[None, None, :] < (excess % n_bins)[..., None]

    cdf = np.cumsum(clipped, axis=2)
    luts = np.floor(255.0 * cdf / n_pix[..., None] + 0.5).astype(np.uint8)
    return TileGrid(
        config=cfg,
        x_starts=x_starts,
        y_starts=y_starts,
        luts=luts,
        classes=classes,
        centers_x2=centers_x2,
        centers_y2=centers_y2,
    )


def _axis_maps(extent: int, centers2: np.ndarray):
    """Bounding tile indices and doubled distances for every coordinate."""
    p2 = 2 * np.arange(extent, dtype=np.int64)
    hi = np.searchsorted(centers2, p2, side="right")
    lo = np.clip(hi - 1, 0, len(centers2) - 1)
    hi = np.clip(hi, 0, len(centers2) - 1)
    collapsed = lo == hi  # pixel outside the center range, or a single tile
    dist_lo = np.where(collapsed, 0, p2 - centers2[lo])
    dist_hi = np.where(collapsed, 0, centers2[hi] - p2)
    weight_lo = np.where(collapsed, 1, dist_hi)
    weight_hi = np.where(collapsed, 0, dist_lo)
    span = weight_lo + weight_hi
    return lo, hi, dist_lo, dist_hi, weight_lo, weight_hi, span


@lru_cache(maxsize=8)
def _interp_planes(width: int, height: int, grid_cols: int, grid_rows: int, n_bins: int):
    """Per-pixel tile indices and integer weight planes, cached per geometry."""
    _, _, cx2, cy2, _ = _grid_geometry(width, height, grid_cols, grid_rows)
    xlo, xhi, _, _, xwl, xwh, xspan = _axis_maps(width, cx2)
    ylo, yhi, _, _, ywl, ywh, yspan = _axis_maps(height, cy2)
    max_den = int(xspan.max()) * int(yspan.max())
    # weights fit int32 unless 2 * 255 * den overflows it (very large tiles)
    dtype = np.int32 if 2 * 255 * max_den < 2**31 - 1 else np.int64
    den = (yspan[:, None] * xspan[None, :]).astype(dtype)
    planes = {
        "w_ll": (ywl[:, None] * xwl[None, :]).astype(dtype),
        "w_lh": (ywl[:, None] * xwh[None, :]).astype(dtype),
        "w_hl": (ywh[:, None] * xwl[None, :]).astype(dtype),
        "w_hh": (ywh[:, None] * xwh[None, :]).astype(dtype),
        "den": den,
        "den2": den * 2,
    }
    stride = np.int64(n_bins)
    for name, yy, xx in (
        ("i_ll", ylo, xlo),
        ("i_lh", ylo, xhi),
        ("i_hl", yhi, xlo),
        ("i_hh", yhi, xhi),
    ):
        planes[name] = ((yy[:, None] * grid_cols + xx[None, :]) * stride).astype(dtype)
    for a in planes.values():
        a.setflags(write=False)
    return planes


def _axis_at(coord: int, centers2: np.ndarray) -> tuple[int, int, int, int, int, int]:
    """Scalar version of :func:`_axis_maps` for a single coordinate."""
    p2 = 2 * int(coord)
    hi = int(np.searchsorted(centers2, p2, side="right"))
    lo = min(max(hi - 1, 0), len(centers2) - 1)
    hi = min(hi, len(centers2) - 1)
    if lo == hi:
        return lo, hi, 0, 0, 1, 0
    dist_lo = p2 - int(centers2[lo])
    dist_hi = int(centers2[hi]) - p2
    return lo, hi, dist_lo, dist_hi, dist_hi, dist_lo


def interp_weights(grid: TileGrid, x: int, y: int) -> InterpWeights:
    """Blend geometry for the pixel at ``(x, y)``.

    Collapsed axes (pixel before the first center, past the last, or a
    single-tile grid) put their whole weight on the surviving tile, so the
    corner and border blending rules fall out of the same formula.
    """
    if x < 0 or y < 0:
        raise ValueError("pixel coordinates must be non-negative")
    xlo, xhi, dxl, dxh, xwl, xwh = _axis_at(x, grid.centers_x2)
    ylo, yhi, dyl, dyh, ywl, ywh = _axis_at(y, grid.centers_y2)
    den = float((xwl + xwh) * (ywl + ywh))
    weights = (
        ywl * xwl / den,
        ywl * xwh / den,
        ywh * xwl / den,
        ywh * xwh / den,
    )
    return InterpWeights(
        tile_x_low=xlo,
        tile_x_high=xhi,
        tile_y_low=ylo,
        tile_y_high=yhi,
        dist_x_low=dxl,
        dist_x_high=dxh,
        dist_y_low=dyl,
        dist_y_high=dyh,
        weights=weights,
    )


def apply_clahe(img: ImageBuffer, cfg: ClaheConfig) -> ImageBuffer:
    """Equalize a 1-channel u8 image with inter-tile mapping interpolation.

    Each output pixel is the weighted blend of the bounding tile mappings
    applied to its input level, rounded to nearest with ties away from
    zero.  The blend is computed in exact integer arithmetic.
    """
    grid = build_tile_mappings(img, cfg)
    planes = _interp_planes(img.width, img.height, cfg.grid_cols, cfg.grid_rows, cfg.n_bins)
    luts_flat = grid.luts.reshape(-1).astype(planes["den"].dtype)
    bins = _bin_index(img.data, cfg.n_bins).astype(planes["den"].dtype)

    mapped_ll = np.take(luts_flat, planes["i_ll"] + bins)
    mapped_lh = np.take(luts_flat, planes["i_lh"] + bins)
    mapped_hl = np.take(luts_flat, planes["i_hl"] + bins)
    mapped_hh = np.take(luts_flat, planes["i_hh"] + bins)

    num = planes["w_ll"] * mapped_ll
    num += planes["w_lh"] * mapped_lh
    num += planes["w_hl"] * mapped_hl
    num += planes["w_hh"] * mapped_hh
    # round(num / den) with ties away from zero, num >= 0
    num <<= 1
    num += planes["den"]
    out = num // planes["den2"]
    return ImageBuffer(out.astype(np.uint8))
