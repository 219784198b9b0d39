"""Decoded 8-bit sRGB rasters and the PNG/JPEG codec boundary."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PilImage
from PIL import UnidentifiedImageError


class ImageIOError(Exception):
    """Base for image decode/encode failures."""


class MissingImageError(ImageIOError):
    """The referenced file does not exist."""


class UnsupportedImageFormatError(ImageIOError):
    """The stream is not PNG or JPEG."""


class CorruptImageError(ImageIOError):
    """The stream declares a supported format but cannot be decoded."""


SUPPORTED_FORMATS = ("PNG", "JPEG")


@dataclass
class Image:
    """An (h, w, 3) uint8 sRGB raster."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.pixels)
        if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
            raise ValueError(f"pixels must be (h, w, 3) uint8, got {a.shape} {a.dtype}")
        self.pixels = a

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def decode_image_bytes(data: bytes) -> Image:
    """Decode a PNG or JPEG stream; grayscale and palette promote to sRGB."""
    try:
        pil = PilImage.open(io.BytesIO(data))
    except UnidentifiedImageError as e:
        raise UnsupportedImageFormatError(
            "stream is not a recognized image; PNG and JPEG are accepted") from e
    if pil.format not in SUPPORTED_FORMATS:
        raise UnsupportedImageFormatError(
            f"unsupported image format {pil.format}; PNG and JPEG are accepted")
    try:
        pil = pil.convert("RGB")
    except (OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(f"corrupt {pil.format} stream: {e}") from e
    return Image(np.asarray(pil, dtype=np.uint8))


def load_image(path: str | Path) -> Image:
    """Load a PNG or JPEG file into an sRGB raster."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except FileNotFoundError as e:
        raise MissingImageError(f"no such image file: {p}") from e
    except IsADirectoryError as e:
        raise MissingImageError(f"not a file: {p}") from e
    return decode_image_bytes(data)


def to_pil(img: Image) -> PilImage.Image:
    return PilImage.fromarray(img.pixels, mode="RGB")


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    to_pil(img).save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(img: Image, quality: int) -> bytes:
    """JPEG-encode; chroma keeps full resolution (4:4:4) from quality 95 up,
    below that the encoder's default 4:2:0 subsampling applies (the realistic
    scanner setting)."""
    if not 1 <= quality <= 100:
        raise ValueError(f"JPEG quality must lie in [1, 100], got {quality}")
    buf = io.BytesIO()
    to_pil(img).save(buf, format="JPEG", quality=quality,
                     subsampling=0 if quality >= 95 else -1)
    return buf.getvalue()


def save_png(img: Image, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(img))


def save_gray_png(plane: np.ndarray, path: str | Path) -> None:
    """Write a single-channel uint8 array (e.g. a label map) as PNG."""
    if plane.ndim != 2 or plane.dtype != np.uint8:
        raise ValueError("expected a (h, w) uint8 array")
    buf = io.BytesIO()
    PilImage.fromarray(plane, mode="L").save(buf, format="PNG")
    Path(path).write_bytes(buf.getvalue())


def load_gray_png(path: str | Path) -> np.ndarray:
    """Read a single-channel PNG back as (h, w) uint8."""
    pil = PilImage.open(Path(path))
    if pil.mode != "L":
        pil = pil.convert("L")
    return np.asarray(pil, dtype=np.uint8)


def downscale_nearest(img: Image, max_width: int) -> tuple[Image, int]:
    """Nearest-neighbor downscale to at most max_width columns.

    Nearest keeps original pixel colors, so classification on the preview
    behaves like classification on the full page. Returns the image and the
    integer scale factor used (1 = unchanged).
    """
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    factor = -(-img.width // max_width)  # ceil division
    if factor <= 1:
        return img, 1
    return Image(img.pixels[::factor, ::factor].copy()), factor
