"""
Imaging module - decodes screenshots and brings them into the canonical frame.

Every reward operates on the resized grayscale frame produced here:
longest edge capped at 1000 px, BT.601 luminance.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ImageDecodeError

logger = logging.getLogger(__name__)

DEFAULT_LONGEST_EDGE = 1000
SUPPORTED_MAXVAL = 255

# BT.601 luma weights for R, G, B
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNM_MAGIC = {b"P5": 1, b"P6": 3}


class ImageFormat(str, Enum):
    PGM = "P5"
    PPM = "P6"
    RAW = "raw"


@dataclass(frozen=True)
class Screenshot:
    """Decoded screenshot; `pixels` is a row-major (H, W, C) uint8 array."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image must be at least 1x1, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.pixels.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x{self.channels}"
            )
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {self.pixels.dtype}")


@dataclass(frozen=True)
class GrayImage:
    """Single-channel luminance image; `pixels` is (H, W) uint8."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {self.pixels.shape} does not match {self.height}x{self.width}"
            )

    def as_screenshot(self) -> Screenshot:
        return Screenshot(self.width, self.height, 1, self.pixels.reshape(self.height, self.width, 1))


def _round_half_away(value: float) -> int:
    """Round to nearest integer, halves away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def _read_pnm_header(data: bytes) -> Tuple[bytes, int, int, int, int]:
    """Parse magic, width, height and maxval; returns them with the raster offset."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                end = data.find(b"\n", pos)
                if end < 0:
                    raise ImageDecodeError("malformed header: unterminated comment")
                pos = end + 1
            else:
                pos += 1
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ImageDecodeError("malformed header: missing field")
        tokens.append(data[start:pos])

    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos:pos + 1].isspace():
        raise ImageDecodeError("malformed header: no separator before payload")
    pos += 1

    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageDecodeError("malformed header: non-integer dimension or maxval")
    return magic, width, height, maxval, pos


def _decode_pnm(data: bytes, fmt: ImageFormat) -> Screenshot:
    magic, width, height, maxval, offset = _read_pnm_header(data)
    if magic not in _PNM_MAGIC:
        raise ImageDecodeError(f"malformed header: unknown magic {magic!r}")
    if magic.decode("ascii") != fmt.value:
        raise ImageDecodeError(f"malformed header: expected {fmt.value}, found {magic.decode('ascii')}")
    if width < 1 or height < 1:
        raise ImageDecodeError(f"malformed header: invalid size {width}x{height}")
    if maxval != SUPPORTED_MAXVAL:
        raise ImageDecodeError(f"unsupported maxval {maxval}")

    channels = _PNM_MAGIC[magic]
    needed = width * height * channels
    if len(data) - offset < needed:
        raise ImageDecodeError(
            f"truncated payload: expected {needed} bytes, got {len(data) - offset}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=needed, offset=offset)
    return Screenshot(width, height, channels, pixels.reshape(height, width, channels).copy())


def _decode_raw(data: bytes, header: Optional[dict]) -> Screenshot:
    if not isinstance(header, dict):
        raise ImageDecodeError("malformed header: RAW payload needs a JSON header")
    try:
        width = int(header["width"])
        height = int(header["height"])
        channels = int(header["channels"])
    except (KeyError, TypeError, ValueError) as e:
        raise ImageDecodeError(f"malformed header: {e}")
    if width < 1 or height < 1 or channels not in (1, 3):
        raise ImageDecodeError(f"malformed header: invalid geometry {width}x{height}x{channels}")

    needed = width * height * channels
    if len(data) < needed:
        raise ImageDecodeError(f"truncated payload: expected {needed} bytes, got {len(data)}")
    if len(data) > needed:
        raise ImageDecodeError(f"malformed payload: {len(data) - needed} trailing bytes")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels).copy()
    return Screenshot(width, height, channels, pixels)


def decode(data: bytes, fmt: ImageFormat, header: Optional[dict] = None) -> Screenshot:
    """Decode raw file content; pixel values are returned untouched."""
    fmt = ImageFormat(fmt)
    if fmt is ImageFormat.RAW:
        return _decode_raw(data, header)
    return _decode_pnm(data, fmt)


def encode(img: Screenshot) -> bytes:
    """Encode as binary PGM (1 channel) or PPM (3 channels)."""
    magic = "P5" if img.channels == 1 else "P6"
    head = f"{magic}\n{img.width} {img.height}\n{SUPPORTED_MAXVAL}\n".encode("ascii")
    return head + img.pixels.tobytes()


def encode_raw(img: Screenshot) -> Tuple[dict, bytes]:
    """Split a screenshot into its JSON header and raw payload."""
    header = {"width": img.width, "height": img.height, "channels": img.channels}
    return header, img.pixels.tobytes()


def read_image(path) -> Screenshot:
    """Load a screenshot from disk, dispatching on the file suffix."""
    path = Path(path)
    suffix = path.suffix.lower()

    if suffix in (".pgm", ".ppm", ".pnm"):
        data = path.read_bytes()
        if suffix == ".pnm":
            fmt = ImageFormat.PPM if data[:2] == b"P6" else ImageFormat.PGM
        else:
            fmt = ImageFormat.PGM if suffix == ".pgm" else ImageFormat.PPM
        return decode(data, fmt)

    if suffix in (".raw", ".json"):
        header_path = path.with_suffix(".json")
        payload_path = path.with_suffix(".raw")
        try:
            header = json.loads(header_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ImageDecodeError(f"malformed header: {e}")
        return decode(payload_path.read_bytes(), ImageFormat.RAW, header=header)

    raise ImageDecodeError(f"unsupported image format: {path.name}")


def write_image(path, img: Screenshot) -> None:
    """Write a screenshot as PGM/PPM, or RAW payload plus JSON header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()

    if suffix == ".raw":
        header, payload = encode_raw(img)
        path.write_bytes(payload)
        path.with_suffix(".json").write_text(json.dumps(header), encoding="utf-8")
        return
    if suffix == ".pgm" and img.channels != 1:
        raise ValueError("PGM output needs a single-channel image")
    if suffix == ".ppm" and img.channels != 3:
        raise ValueError("PPM output needs a three-channel image")
    path.write_bytes(encode(img))


def _bilinear_taps(src_len: int, dst_len: int):
    """Source indices and weights for sampling at destination pixel centers."""
    coords = (np.arange(dst_len) + 0.5) * (src_len / dst_len) - 0.5
    coords = np.clip(coords, 0.0, src_len - 1)
    lo = np.floor(coords).astype(np.intp)
    hi = np.minimum(lo + 1, src_len - 1)
    return lo, hi, coords - lo


def resize_longest_edge(img: Screenshot, target: int = DEFAULT_LONGEST_EDGE) -> Tuple[Screenshot, float]:
    """
    Downscale so the longest edge equals `target`.
    Images already within bound come back as-is with scale 1.0.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")

    longest = max(img.width, img.height)
    if longest <= target:
        return img, 1.0

    scale = target / longest
    new_w = max(1, _round_half_away(img.width * scale))
    new_h = max(1, _round_half_away(img.height * scale))

    y0, y1, fy = _bilinear_taps(img.height, new_h)
    x0, x1, fx = _bilinear_taps(img.width, new_w)
    src = img.pixels.astype(np.float64)
    fx = fx[None, :, None]

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy)[:, None, None] + bottom * fy[:, None, None]

    pixels = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    logger.debug(f"Resized {img.width}x{img.height} -> {new_w}x{new_h} (scale {scale:.6f})")
    return Screenshot(new_w, new_h, img.channels, pixels), scale


def to_gray(img: Screenshot) -> GrayImage:
    """Luminance conversion; single-channel images pass through."""
    if img.channels == 1:
        return GrayImage(img.width, img.height, img.pixels[:, :, 0])

    rgb = img.pixels.astype(np.float64)
    r_w, g_w, b_w = LUMA_WEIGHTS
    lum = rgb[:, :, 0] * r_w + rgb[:, :, 1] * g_w + rgb[:, :, 2] * b_w
    pixels = np.clip(np.floor(lum + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(img.width, img.height, pixels)


def load_canonical(path, resize: bool = True, target: int = DEFAULT_LONGEST_EDGE) -> Tuple[GrayImage, float]:
    """Read, optionally resize, and grayscale a screenshot; returns the applied scale."""
    shot = read_image(path)
    scale = 1.0
    if resize:
        shot, scale = resize_longest_edge(shot, target)
    return to_gray(shot), scale
