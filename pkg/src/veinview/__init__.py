"""NIR vessel-enhancement toolkit.

Core pieces: bit-exact raster I/O (:mod:`veinview.imgcore`), a
contrast-preserving grayscale blend (:mod:`veinview.grayscale`),
region-interpolated CLAHE (:mod:`veinview.clahe`), median filtering
(:mod:`veinview.medianfilt`), multiscale vesselness
(:mod:`veinview.frangi`), and an order-preserving video pipeline
(:mod:`veinview.pipeline`), wrapped by an HTTP service
(:mod:`veinview.service`) and a thin CLI (:mod:`veinview.cli`).
"""

__version__ = "0.1.0"

from .clahe import ClaheConfig, TileGrid, apply_clahe, build_tile_mappings, clip_histogram
from .frangi import (
    FrangiConfig,
    HessianField,
    VesselnessMap,
    eigen2x2,
    frangi_multiscale,
    hessian_at_scale,
    vesselness_at_scale,
)
from .grayscale import rgb_to_gray, rgb_to_gray_pixel
from .imgcore import (
    FormatError,
    ImageBuffer,
    Roi,
    VideoStream,
    extract_roi,
    read_image,
    read_y4m_frames,
    write_image,
    write_y4m,
)
from .medianfilt import MedianConfig, median_filter
from .pipeline import (
    FrameStats,
    PipelineSpec,
    Stage,
    canonical_pipeline,
    remove_background,
    run_pipeline,
)

__all__ = [
    "__version__",
    "ClaheConfig",
    "TileGrid",
    "apply_clahe",
    "build_tile_mappings",
    "clip_histogram",
    "FrangiConfig",
    "HessianField",
    "VesselnessMap",
    "eigen2x2",
    "frangi_multiscale",
    "hessian_at_scale",
    "vesselness_at_scale",
    "rgb_to_gray",
    "rgb_to_gray_pixel",
    "FormatError",
    "ImageBuffer",
    "Roi",
    "VideoStream",
    "extract_roi",
    "read_image",
    "read_y4m_frames",
    "write_image",
    "write_y4m",
    "MedianConfig",
    "median_filter",
    "FrameStats",
    "PipelineSpec",
    "Stage",
    "canonical_pipeline",
    "remove_background",
    "run_pipeline",
]
