"""Image buffers, regions of interest, and bit-exact raster I/O.

Every processing module exchanges :class:`ImageBuffer` objects, so file
formats live here and nowhere else.  Supported formats are deliberately
minimal and byte-exactly specified: binary PGM (P5) / PPM (P6) stills
with maxval 255, and uncompressed YUV4MPEG2 video (C420 or Cmono).
Compressed codecs are adapter territory outside this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "FormatError",
    "ImageBuffer",
    "Roi",
    "VideoStream",
    "extract_roi",
    "decode_image",
    "encode_image",
    "read_image",
    "write_image",
    "decode_y4m",
    "encode_y4m",
    "read_y4m_frames",
    "write_y4m",
]


class FormatError(ValueError):
    """Malformed image or video payload.  Carries the offending byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """2-D raster of scalar samples, the universal currency between stages.

    ``data`` is either ``(h, w)`` for grayscale or ``(h, w, 3)`` for
    channel-interleaved RGB, with dtype uint8 (values 0..255) or float32
    (normalized values in [0, 1]).  Buffers are immutable after
    construction, so they are safe to share across worker threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise ValueError(f"expected (h, w) or (h, w, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {arr.shape}")
        if arr.dtype == np.uint8:
            pass
        elif arr.dtype == np.float32:
            if arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
                raise ValueError("float32 samples must lie in [0, 1]")
        else:
            raise ValueError(f"unsupported dtype {arr.dtype}; use uint8 or float32")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def depth(self) -> str:
        """Sample depth: ``"u8"`` or ``"f32"``."""
        return "u8" if self.data.dtype == np.uint8 else "f32"

    def to_f32(self) -> "ImageBuffer":
        """Canonical u8 -> f32 conversion: v / 255."""
        if self.depth == "f32":
            return self
        return ImageBuffer((self.data.astype(np.float64) / 255.0).astype(np.float32))

    def to_u8(self) -> "ImageBuffer":
        """Canonical f32 -> u8 quantization: round(v * 255), ties away from zero."""
        if self.depth == "u8":
            return self
        scaled = self.data.astype(np.float64) * 255.0
        return ImageBuffer(np.floor(np.clip(scaled, 0.0, 255.0) + 0.5).astype(np.uint8))

    def same_pixels(self, other: "ImageBuffer") -> bool:
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True)
class Roi:
    """Rectangular region of interest; ``(x0, y0)`` top-left inclusive."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"roi must be at least 1x1, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"roi origin must be non-negative, got ({self.x0}, {self.y0})")


@dataclass(frozen=True)
class VideoStream:
    """Ordered sequence of frames sharing one geometry, depth, and frame rate."""

    width: int
    height: int
    fps: Fraction
    frames: tuple[ImageBuffer, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (self.width, self.height):
                raise ValueError(
                    f"frame {i} is {f.width}x{f.height}, stream is {self.width}x{self.height}"
                )
        if self.frames:
            c0, d0 = self.frames[0].channels, self.frames[0].depth
            for i, f in enumerate(self.frames):
                if (f.channels, f.depth) != (c0, d0):
                    raise ValueError(f"frame {i} mixes channel count or depth within the stream")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def channels(self) -> int:
        return self.frames[0].channels if self.frames else 1


def extract_roi(img: ImageBuffer, roi: Roi) -> ImageBuffer:
    """Copy the ``roi`` window out of ``img``; the source is left untouched."""
    if roi.x0 + roi.w > img.width or roi.y0 + roi.h > img.height:
        raise ValueError(
            f"roi {roi} exceeds image bounds {img.width}x{img.height}"
        )
    view = img.data[roi.y0 : roi.y0 + roi.h, roi.x0 : roi.x0 + roi.w]
    return ImageBuffer(view.copy())


# ---------------------------------------------------------------------------
# PGM / PPM (binary, maxval 255)
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\r\n\x0b\x0c"


class _TokenScanner:
    """Whitespace-delimited token scanner that tracks byte offsets."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def skip_separators(self):
        n = len(self.blob)
        while self.pos < n:
            b = self.blob[self.pos : self.pos + 1]
            if b in (b"#",):
                # netpbm comment: runs to end of line
                nl = self.blob.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            elif b in _WHITESPACE:
                self.pos += 1
            else:
                return

    def token(self, what: str) -> tuple[bytes, int]:
        self.skip_separators()
        if self.pos >= len(self.blob):
            raise FormatError(f"unexpected end of header while reading {what}", self.pos)
        start = self.pos
        while self.pos < len(self.blob) and self.blob[self.pos : self.pos + 1] not in _WHITESPACE:
            self.pos += 1
        return self.blob[start : self.pos], start

    def int_token(self, what: str) -> tuple[int, int]:
        tok, off = self.token(what)
        try:
            return int(tok.decode("ascii")), off
        except (UnicodeDecodeError, ValueError):
            raise FormatError(f"invalid {what} token {tok!r}", off) from None


def decode_image(blob: bytes) -> ImageBuffer:
    """Decode binary PGM (P5) or PPM (P6) bytes with maxval 255.

    Returns a uint8 buffer with 1 channel for PGM and 3 for PPM; pixel
    order is preserved row-major.  Raises :class:`FormatError` naming the
    byte offset for malformed headers, unsupported maxval, or payloads
    that do not match the declared geometry.
    """
    sc = _TokenScanner(blob)
    magic, off = sc.token("magic")
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"not a binary PGM/PPM file, magic {magic!r}", off)
    channels = 1 if magic == b"P5" else 3
    width, off_w = sc.int_token("width")
    height, off_h = sc.int_token("height")
    if width < 1:
        raise FormatError(f"invalid width {width}", off_w)
    if height < 1:
        raise FormatError(f"invalid height {height}", off_h)
    maxval, off_m = sc.int_token("maxval")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}; only 255 is supported", off_m)
    if sc.pos >= len(blob) or blob[sc.pos : sc.pos + 1] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval", sc.pos)
    payload_start = sc.pos + 1
    expected = width * height * channels
    payload = blob[payload_start:]
    if len(payload) < expected:
        raise FormatError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            payload_start + len(payload),
        )
    if len(payload) > expected:
        raise FormatError(
            f"trailing data after {expected} payload bytes", payload_start + expected
        )
    arr = np.frombuffer(payload, dtype=np.uint8, count=expected)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return ImageBuffer(arr.reshape(shape).copy())


def read_image(path) -> ImageBuffer:
    """Read a PGM/PPM file; see :func:`decode_image`."""
    return decode_image(Path(path).read_bytes())


def encode_image(img: ImageBuffer) -> bytes:
    """Encode a u8 buffer as binary PGM (1 channel) or PPM (3 channels).

    Float buffers must be quantized by the caller first (``to_u8``), so
    that the one canonical quantization rule is applied explicitly.
    """
    if img.depth != "u8":
        raise ValueError("image encoding requires a u8 buffer; quantize with to_u8() first")
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n" + f"{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.data.tobytes()


def write_image(img: ImageBuffer, path) -> None:
    """Write a PGM/PPM file; see :func:`encode_image`."""
    Path(path).write_bytes(encode_image(img))


# ---------------------------------------------------------------------------
# YUV4MPEG2
# ---------------------------------------------------------------------------

_Y4M_MAGIC = b"YUV4MPEG2"
_C420_TAGS = {"420", "420jpeg", "420mpeg2", "420paldv"}


def _bt601_fullrange_to_rgb(y, cb, cr) -> np.ndarray:
    """Full-range BT.601 YCbCr -> RGB, rounded half away from zero."""
    y = y.astype(np.float64)
    cb = cb.astype(np.float64) - 128.0
    cr = cr.astype(np.float64) - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    rgb = np.stack([r, g, b], axis=-1)
    return np.floor(np.clip(rgb, 0.0, 255.0) + 0.5).astype(np.uint8)


def _rgb_to_bt601_fullrange(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    quant = lambda p: np.floor(np.clip(p, 0.0, 255.0) + 0.5).astype(np.uint8)
    return quant(y), quant(cb), quant(cr)


def _parse_y4m_header(line: bytes, offset: int) -> dict:
    fields = line.split(b" ")
    if fields[0] != _Y4M_MAGIC:
        raise FormatError(f"missing {_Y4M_MAGIC.decode()} magic", offset)
    info = {"fps": Fraction(30, 1), "colorspace": "420"}
    for tag in fields[1:]:
        if not tag:
            continue
        key, val = tag[:1], tag[1:].decode("ascii", "replace")
        if key == b"W":
            info["width"] = int(val)
        elif key == b"H":
            info["height"] = int(val)
        elif key == b"F":
            num, den = val.split(":")
            info["fps"] = Fraction(int(num), int(den))
        elif key == b"C":
            info["colorspace"] = val
        # I (interlacing), A (aspect) and X (extensions) are accepted and ignored
    if "width" not in info or "height" not in info:
        raise FormatError("stream header lacks W or H tag", offset)
    if info["colorspace"] != "mono" and info["colorspace"] not in _C420_TAGS:
        raise FormatError(f"unknown colorspace tag C{info['colorspace']}", offset)
    return info


def decode_y4m(blob: bytes) -> VideoStream:
    """Decode an uncompressed YUV4MPEG2 stream.

    C420 frames are upsampled nearest-neighbor (each chroma sample covers
    its 2x2 luma block) and converted to RGB with full-range BT.601; Cmono
    frames become single-channel buffers.  Concatenated streams are
    accepted as long as geometry and colorspace agree, so appending two
    files yields the appended frame sequence.
    """
    nl = blob.find(b"\n")
    if nl < 0:
        raise FormatError("missing stream header line", 0)
    info = _parse_y4m_header(blob[:nl], 0)
    width, height = info["width"], info["height"]
    mono = info["colorspace"] == "mono"
    if not mono and (width % 2 or height % 2):
        raise FormatError(f"C420 requires even dimensions, got {width}x{height}", 0)
    frame_bytes = width * height if mono else width * height + 2 * ((width // 2) * (height // 2))

    frames: list[ImageBuffer] = []
    pos = nl + 1
    while pos < len(blob):
        line_end = blob.find(b"\n", pos)
        if line_end < 0:
            raise FormatError("unterminated frame marker line", pos)
        line = blob[pos:line_end]
        if line.startswith(_Y4M_MAGIC):
            # a second stream appended to the file: header must agree
            nxt = _parse_y4m_header(line, pos)
            if (nxt["width"], nxt["height"], nxt["colorspace"] == "mono") != (width, height, mono):
                raise FormatError("appended stream geometry differs from the first header", pos)
            pos = line_end + 1
            continue
        if line.split(b" ")[0] != b"FRAME":
            raise FormatError(f"expected FRAME marker, got {line[:16]!r}", pos)
        start = line_end + 1
        payload = blob[start : start + frame_bytes]
        if len(payload) < frame_bytes:
            raise FormatError(
                f"short frame payload: expected {frame_bytes} bytes, found {len(payload)}",
                start + len(payload),
            )
        arr = np.frombuffer(payload, dtype=np.uint8)
        if mono:
            frames.append(ImageBuffer(arr.reshape(height, width).copy()))
        else:
            ys = arr[: width * height].reshape(height, width)
            cw, ch = width // 2, height // 2
            cb = arr[width * height : width * height + cw * ch].reshape(ch, cw)
            cr = arr[width * height + cw * ch :].reshape(ch, cw)
            cb_full = np.repeat(np.repeat(cb, 2, axis=0), 2, axis=1)
            cr_full = np.repeat(np.repeat(cr, 2, axis=0), 2, axis=1)
            frames.append(ImageBuffer(_bt601_fullrange_to_rgb(ys, cb_full, cr_full)))
        pos = start + frame_bytes
    return VideoStream(width=width, height=height, fps=info["fps"], frames=tuple(frames))


def read_y4m_frames(path) -> VideoStream:
    """Read a YUV4MPEG2 file; see :func:`decode_y4m`."""
    return decode_y4m(Path(path).read_bytes())


def encode_y4m(stream: VideoStream) -> bytes:
    """Encode a stream as YUV4MPEG2: Cmono for gray frames, C420 for RGB.

    RGB frames are converted with full-range BT.601 and chroma is
    subsampled by averaging each 2x2 block, which makes the round trip
    exact for gray streams and approximate for color ones.
    """
    if not stream.frames:
        raise ValueError("refusing to encode a stream with no frames")
    if stream.frames[0].depth != "u8":
        raise ValueError("y4m encoding requires u8 frames; quantize first")
    mono = stream.channels == 1
    if not mono and (stream.width % 2 or stream.height % 2):
        raise ValueError(f"C420 output requires even dimensions, got {stream.width}x{stream.height}")
    cs = "mono" if mono else "420"
    header = (
        f"YUV4MPEG2 W{stream.width} H{stream.height} "
        f"F{stream.fps.numerator}:{stream.fps.denominator} Ip A1:1 C{cs}\n"
    ).encode("ascii")
    chunks = [header]
    for frame in stream.frames:
        chunks.append(b"FRAME\n")
        if mono:
            chunks.append(frame.data.tobytes())
        else:
            y, cb, cr = _rgb_to_bt601_fullrange(frame.data)
            chunks.append(y.tobytes())
            for plane in (cb, cr):
                p = plane.astype(np.float64)
                sub = (p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2]) / 4.0
                chunks.append(np.floor(sub + 0.5).astype(np.uint8).tobytes())
    return b"".join(chunks)


def write_y4m(stream: VideoStream, path) -> None:
    """Write a YUV4MPEG2 file; see :func:`encode_y4m`."""
    Path(path).write_bytes(encode_y4m(stream))
