"""HTTP service wrapping the enhancement library.

Image operations take raw PGM/PPM bytes as the request body
(``application/octet-stream``) with options as query parameters, and
return the processed image the same way; video operations take raw
YUV4MPEG2 bytes and return JSON (the processed stream is base64-encoded
inside the response so per-frame timing can ride along).  Malformed
payloads and contract violations map to 400 with a plain-text detail.

The CLI drives this same app in-process through an ASGI transport, so
service responses are byte-identical to library calls by construction.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import time
from fractions import Fraction
from typing import Any

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.concurrency import run_in_threadpool

from . import __version__
from .clahe import ClaheConfig, apply_clahe, parse_grid
from .frangi import DEFAULT_SCALES, FrangiConfig, frangi_multiscale
from .grayscale import rgb_to_gray
from .imgcore import ImageBuffer, VideoStream, decode_image, decode_y4m, encode_image, encode_y4m
from .medianfilt import MedianConfig, median_filter
from .pipeline import (
    FrameStats,
    PipelineSpec,
    canonical_pipeline,
    run_pipeline,
    stream_checksum,
    summarize_stats,
)

_OCTET = "application/octet-stream"


class HealthResponse(BaseModel):
    status: str
    version: str


class FrameStatsModel(BaseModel):
    frame: int
    stage_us: list[int]
    latency_us: int
    fps_rolling: float

    @staticmethod
    def from_stats(stats: FrameStats) -> "FrameStatsModel":
        return FrameStatsModel(
            frame=stats.index,
            stage_us=list(stats.stage_us),
            latency_us=stats.latency_us,
            fps_rolling=stats.fps_rolling,
        )


class PipelineSpecModel(BaseModel):
    name: str
    stages: list[dict[str, Any]]
    parallelism: int
    queue_depth: int


class VideoProcessResponse(BaseModel):
    frames: int
    width: int
    height: int
    fps: float
    checksum: str
    stats: list[FrameStatsModel]
    video_b64: str | None = None


class BenchResponse(BaseModel):
    frames: int
    total_seconds: float
    fps: float
    stage_labels: list[str]
    stage_mean_us: list[float]
    stage_max_us: list[int]
    latency_mean_us: float
    checksum: str
    stats: list[FrameStatsModel]


def _parse_threshold(text: str) -> int | str:
    if text == "otsu":
        return "otsu"
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"threshold must be an integer or 'otsu', got {text!r}") from None


def _parse_scales(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"scales must be comma-separated numbers, got {text!r}") from None


def _parse_c(text: str) -> float | str:
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"c must be a number or 'auto', got {text!r}") from None


def _resolve_spec(
    spec_json: str | None, channels: int, jobs: int | None, queue_depth: int | None
) -> PipelineSpec:
    if spec_json is None:
        spec = canonical_pipeline(input_channels=channels)
    else:
        spec = PipelineSpec.from_json(json.loads(spec_json))
    if jobs is not None:
        spec = dataclasses.replace(spec, parallelism=jobs)
    if queue_depth is not None:
        spec = dataclasses.replace(spec, queue_depth=queue_depth)
    return spec


def _run_video(body: bytes, spec_json: str | None, jobs: int | None, queue_depth: int | None):
    stream = decode_y4m(body)
    spec = _resolve_spec(spec_json, stream.channels or 1, jobs, queue_depth)
    start = time.perf_counter()
    out, stats = run_pipeline(spec, stream)
    total = time.perf_counter() - start
    return spec, out, stats, total


def create_app() -> FastAPI:
    app = FastAPI(title="veinview", version=__version__)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok", version=__version__)

    @app.get("/v1/pipeline/canonical", response_model=PipelineSpecModel)
    def canonical(input_channels: int = Query(3, ge=1, le=3)):
        return PipelineSpecModel(**canonical_pipeline(input_channels=input_channels).to_json())

    @app.post("/v1/ops/gray")
    async def op_gray(request: Request, rescale: bool = False, eq6_verbatim: bool = False):
        img = decode_image(await request.body())
        out = await run_in_threadpool(
            rgb_to_gray, img, rescale=rescale, blue_terms_from_green=eq6_verbatim
        )
        return Response(content=encode_image(out), media_type=_OCTET)

    @app.post("/v1/ops/clahe")
    async def op_clahe(
        request: Request,
        grid: str = "8x8",
        clip_limit: float = 2.0,
        bins: int = 256,
    ):
        img = decode_image(await request.body())
        cols, rows = parse_grid(grid)
        cfg = ClaheConfig(grid_cols=cols, grid_rows=rows, clip_limit=clip_limit, n_bins=bins)
        out = await run_in_threadpool(apply_clahe, img, cfg)
        return Response(content=encode_image(out), media_type=_OCTET)

    @app.post("/v1/ops/median")
    async def op_median(request: Request, window: int = 5):
        img = decode_image(await request.body())
        out = await run_in_threadpool(median_filter, img, MedianConfig(window=window))
        return Response(content=encode_image(out), media_type=_OCTET)

    @app.post("/v1/ops/frangi")
    async def op_frangi(
        request: Request,
        scales: str = ",".join(str(s) for s in DEFAULT_SCALES),
        beta: float = 0.5,
        c: str = "auto",
        dark_vessels: bool = True,
    ):
        img = decode_image(await request.body())
        cfg = FrangiConfig(
            scales=_parse_scales(scales), beta=beta, c=_parse_c(c), dark_vessels=dark_vessels
        )
        vmap = await run_in_threadpool(frangi_multiscale, img, cfg)
        return Response(content=encode_image(vmap.to_u8_buffer()), media_type=_OCTET)

    @app.post("/v1/ops/enhance")
    async def op_enhance(
        request: Request,
        threshold: str = "otsu",
        median_window: int = 5,
        clip_limit: float = 2.0,
        bins: int = 256,
        rescale: bool = False,
        eq6_verbatim: bool = False,
    ):
        img = decode_image(await request.body())
        spec = canonical_pipeline(
            input_channels=img.channels,
            threshold=_parse_threshold(threshold),
            median_window=median_window,
            clip_limit=clip_limit,
            bins=bins,
            rescale=rescale,
            blue_terms_from_green=eq6_verbatim,
        )

        def run_one() -> ImageBuffer:
            stream = VideoStream(img.width, img.height, fps=Fraction(1), frames=(img,))
            out, _ = run_pipeline(spec, stream)
            return out.frames[0]

        out = await run_in_threadpool(run_one)
        return Response(content=encode_image(out), media_type=_OCTET)

    @app.post("/v1/video/process", response_model=VideoProcessResponse)
    async def video_process(
        request: Request,
        spec: str | None = None,
        jobs: int | None = Query(None, ge=1),
        queue_depth: int | None = Query(None, ge=1),
        include_video: bool = True,
    ):
        body = await request.body()
        used_spec, out, stats, total = await run_in_threadpool(
            _run_video, body, spec, jobs, queue_depth
        )
        summary = summarize_stats(used_spec, stats, total)
        video_b64 = None
        if include_video and out.frames:
            video_b64 = base64.b64encode(encode_y4m(out)).decode("ascii")
        return VideoProcessResponse(
            frames=len(out.frames),
            width=out.width,
            height=out.height,
            fps=summary["fps"],
            checksum=stream_checksum(out),
            stats=[FrameStatsModel.from_stats(s) for s in stats],
            video_b64=video_b64,
        )

    @app.post("/v1/video/bench", response_model=BenchResponse)
    async def video_bench(
        request: Request,
        spec: str | None = None,
        jobs: int | None = Query(None, ge=1),
        queue_depth: int | None = Query(None, ge=1),
    ):
        body = await request.body()
        used_spec, out, stats, total = await run_in_threadpool(
            _run_video, body, spec, jobs, queue_depth
        )
        summary = summarize_stats(used_spec, stats, total)
        return BenchResponse(
            checksum=stream_checksum(out),
            stats=[FrameStatsModel.from_stats(s) for s in stats],
            **summary,
        )

    return app


app = create_app()
