"""Acceptance suite: one test per release criterion, at fixed tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion with the measured numbers.
"""

import json
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from conftest import make_stream
from oracles import clahe_reference, gray_reference, median_reference
from veinview.clahe import ClaheConfig, apply_clahe
from veinview.frangi import FrangiConfig, frangi_multiscale, hessian_at_scale, _derivative_kernels
from veinview.grayscale import rgb_to_gray_pixel
from veinview.imgcore import ImageBuffer, VideoStream, decode_y4m, read_image, write_y4m
from veinview.medianfilt import MedianConfig, median_filter
from veinview.cli import dispatch

GOLDEN = Path(__file__).parent / "golden"


def report(line: str):
    print(f"\n[acceptance] {line}")


def test_criterion_1_grayscale_oracle():
    rng = np.random.default_rng(101)
    triples = rng.integers(0, 256, (10_000, 3)).tolist()
    triples += [(r, g, b) for r in (0, 255) for g in (0, 255) for b in (0, 255)]
    start = time.perf_counter()
    for r, g, b in triples:
        assert rgb_to_gray_pixel(r, g, b) == gray_reference(r, g, b)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(f"1 grayscale oracle: PASS ({len(triples)} triples exact, {elapsed:.2f}s < 1s)")


def test_criterion_2_clahe_oracle():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    for _ in range(20):
        img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        for grid in ((4, 4), (8, 8)):
            got = apply_clahe(ImageBuffer(img), ClaheConfig(*grid)).data
            assert np.array_equal(got, clahe_reference(img, *grid))
    for value in rng.integers(0, 256, 10):
        img = ImageBuffer(np.full((64, 64), value, dtype=np.uint8))
        for grid in ((4, 4), (8, 8)):
            out = apply_clahe(img, ClaheConfig(*grid)).data
            assert np.all(out == out[0, 0])
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(
        "2 clahe oracle: PASS (20 images x {4x4, 8x8} exact, "
        f"10 constants constant-out, {elapsed:.2f}s < 10s)"
    )


def test_criterion_3_median_oracle():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    for _ in range(20):
        img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
        for k in (3, 5):
            got = median_filter(ImageBuffer(img), MedianConfig(k)).data
            assert np.array_equal(got, median_reference(img, k))
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(f"3 median oracle: PASS (20 images x k in {{3,5}} exact, {elapsed:.2f}s < 5s)")


def test_criterion_4_frangi_properties():
    rng = np.random.default_rng(404)
    # range on random and synthetic content
    cfg = FrangiConfig(scales=(1.0, 2.0, 3.0))
    for _ in range(3):
        vmap = frangi_multiscale(ImageBuffer(rng.integers(0, 256, (48, 48), dtype=np.uint8)), cfg)
        assert vmap.values.min() >= 0.0 and vmap.values.max() <= 1.0

    # constant image scores exactly background
    flat = frangi_multiscale(ImageBuffer(np.full((48, 48), 77, dtype=np.uint8)), cfg)
    assert np.abs(flat.values).max() < 1e-9

    # dark Gaussian ridge of width 3 px: winning scale within one step of 3
    h, w = 64, 129
    xx = np.arange(w, dtype=np.float64)[None, :]
    profile = 255.0 * (1.0 - 0.7 * np.exp(-((xx - 64.0) ** 2) / (2 * 3.0**2)))
    ridge = ImageBuffer(np.clip(np.round(np.tile(profile, (h, 1))), 0, 255).astype(np.uint8))
    scales = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    vmap = frangi_multiscale(ridge, FrangiConfig(scales=scales, c=0.1))
    winners = np.array(scales)[vmap.argmax_index[:, 64]]
    frac = float(np.isin(winners, (2.0, 3.0, 4.0)).mean())
    assert vmap.values.min() >= 0.0 and vmap.values.max() <= 1.0
    assert frac >= 0.95

    # response survives a 30-degree rotation (bilinear resample) within 10%
    n = 160
    yy2, xx2 = np.mgrid[0:n, 0:n].astype(np.float64)
    d = xx2 - n / 2.0
    base = np.clip(np.round(255.0 * (1.0 - 0.7 * np.exp(-(d * d) / (2 * 9.0)))), 0, 255)
    center = (n - 1) / 2.0
    theta = np.deg2rad(30.0)
    matrix = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    offset = np.array([center, center]) - matrix @ np.array([center, center])
    rotated = ndimage.affine_transform(base, matrix, offset=offset, order=1, mode="nearest")
    cfg_r = FrangiConfig(scales=scales, c=0.1)
    v_axis = frangi_multiscale(ImageBuffer(base.astype(np.uint8)), cfg_r).values
    v_rot = frangi_multiscale(ImageBuffer(np.round(rotated).clip(0, 255).astype(np.uint8)), cfg_r).values
    resp_axis = float(v_axis[40:120, n // 2].mean())
    ts = np.arange(-40, 41)
    rows = np.round(n / 2 + ts * np.cos(theta)).astype(int)
    cols = np.round(n / 2 - ts * np.sin(theta)).astype(int)
    resp_rot = float(v_rot[rows, cols].mean())
    ratio = resp_rot / resp_axis
    assert abs(ratio - 1.0) <= 0.10

    # Hessian agrees with central finite differences of the smoothed image
    from scipy.ndimage import convolve1d

    blob_rng = np.random.default_rng(7)
    img = np.zeros((n, n))
    for _ in range(6):
        cx, cy = blob_rng.uniform(40, 120, 2)
        s, a = blob_rng.uniform(10, 16), blob_rng.uniform(-1, 1)
        img += a * np.exp(-((xx2 - cx) ** 2 + (yy2 - cy) ** 2) / (2 * s * s))
    worst = 0.0
    for sigma in (1.5, 2.0, 3.0):
        g0, _, _ = _derivative_kernels(sigma)
        smooth = convolve1d(convolve1d(img, g0, axis=1, mode="nearest"), g0, axis=0, mode="nearest")
        s2 = sigma * sigma
        fd = {
            "hxx": (np.roll(smooth, -1, 1) - 2 * smooth + np.roll(smooth, 1, 1)) * s2,
            "hyy": (np.roll(smooth, -1, 0) - 2 * smooth + np.roll(smooth, 1, 0)) * s2,
            "hxy": (
                np.roll(np.roll(smooth, -1, 0), -1, 1)
                - np.roll(np.roll(smooth, -1, 0), 1, 1)
                - np.roll(np.roll(smooth, 1, 0), -1, 1)
                + np.roll(np.roll(smooth, 1, 0), 1, 1)
            )
            / 4.0
            * s2,
        }
        field = hessian_at_scale(img, sigma)
        r = int(np.ceil(4 * sigma)) + 2
        sl = (slice(r, n - r), slice(r, n - r))
        for name, plane in (("hxx", field.hxx), ("hyy", field.hyy), ("hxy", field.hxy)):
            rel = float(np.abs(plane[sl] - fd[name][sl]).max() / np.abs(fd[name][sl]).max())
            worst = max(worst, rel)
            assert rel < 1e-2
    report(
        f"4 frangi properties: PASS (ridge argmax in {{2,3,4}} for {frac:.0%} of centerline, "
        f"rotation ratio {ratio:.3f}, hessian-vs-FD worst rel err {worst:.4f} < 1e-2)"
    )


def _synthetic_rgb_stream(frames, h, w, seed=11):
    """Moving blob over a gradient; deterministic and compression-free."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    base = 60.0 + 120.0 * xx / w + 40.0 * yy / h
    noise = rng.normal(0, 3.0, size=(h, w))
    out = []
    for i in range(frames):
        cx = w * (0.2 + 0.6 * (i / max(frames - 1, 1)))
        cy = h * 0.5 + 0.2 * h * np.sin(i / 5.0)
        blob = 150.0 * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * (w / 12.0) ** 2))
        r = np.clip(np.round(base + blob + noise), 0, 255)
        g = np.clip(np.round(0.8 * base + 0.5 * blob), 0, 255)
        b = np.clip(np.round(0.6 * base + 0.3 * blob + 20.0), 0, 255)
        out.append(ImageBuffer(np.stack([r, g, b], axis=-1).astype(np.uint8)))
    return make_stream(out)


def test_criterion_5_pipeline_determinism(tmp_path):
    stream = _synthetic_rgb_stream(100, 240, 320)
    src = tmp_path / "in.y4m"
    write_y4m(stream, src)
    out1, out4 = tmp_path / "jobs1.y4m", tmp_path / "jobs4.y4m"
    assert dispatch(["video", str(src), str(out1), "--jobs", "1"]) == 0
    assert dispatch(["video", str(src), str(out4), "--jobs", "4"]) == 0
    b1, b4 = out1.read_bytes(), out4.read_bytes()
    assert b1 == b4
    decoded = decode_y4m(b1)
    assert len(decoded) == 100
    report("5 pipeline determinism: PASS (100 frames 320x240, jobs 1 vs 4 byte-identical)")


def test_criterion_6_realtime_throughput(tmp_path, capsys):
    stream = _synthetic_rgb_stream(100, 480, 640)
    src = tmp_path / "in.y4m"
    write_y4m(stream, src)
    assert dispatch(["bench", str(src), "--jobs", "1"]) == 0
    out = capsys.readouterr().out
    summary = json.loads(out[: out.rindex("fps:")])
    fps = summary["fps"]
    assert summary["frames"] == 100
    assert fps >= 10.0
    report(f"6 real-time throughput: PASS ({fps:.1f} fps >= 10 fps, 100 frames 640x480, jobs=1)")


def test_criterion_7_frangi_runtime():
    rng = np.random.default_rng(707)
    img = ImageBuffer(rng.integers(0, 256, (960, 1280), dtype=np.uint8))
    cfg = FrangiConfig()  # eight default scales
    start = time.perf_counter()
    vmap = frangi_multiscale(img, cfg)
    elapsed = time.perf_counter() - start
    assert len(cfg.scales) == 8
    assert vmap.values.shape == (960, 1280)
    assert elapsed < 120.0
    report(f"7 frangi runtime: PASS (8 scales on 1280x960 in {elapsed:.1f}s < 120s)")


def test_criterion_8_golden_regression(tmp_path):
    from veinview.imgcore import encode_image
    from veinview.grayscale import rgb_to_gray
    from veinview.pipeline import canonical_pipeline, run_pipeline

    gray_in = read_image(GOLDEN / "vessels.pgm")
    rgb_in = read_image(GOLDEN / "vessels.ppm")

    checks = {
        "gray.pgm": encode_image(rgb_to_gray(rgb_in)),
        "clahe_8x8.pgm": encode_image(apply_clahe(gray_in, ClaheConfig(8, 8))),
        "median_5.pgm": encode_image(median_filter(gray_in, MedianConfig(5))),
        "frangi_s1-4.pgm": encode_image(
            frangi_multiscale(gray_in, FrangiConfig(scales=(1.0, 2.0, 3.0, 4.0))).to_u8_buffer()
        ),
    }
    stream = VideoStream(gray_in.width, gray_in.height, Fraction(1), frames=(gray_in,))
    enhanced, _ = run_pipeline(canonical_pipeline(input_channels=1), stream)
    checks["enhance.pgm"] = encode_image(enhanced.frames[0])

    for name, produced in checks.items():
        committed = (GOLDEN / name).read_bytes()
        assert produced == committed, f"golden mismatch for {name}"
    report(f"8 golden regression: PASS ({len(checks)} committed outputs byte-identical)")
