"""CIELAB color math: sRGB conversions and the delta-E (CIE76) distance.

All classification in this package happens in Lab under D65 so that one
radius unit means the same perceptual difference regardless of hue. Values
are carried as float64; quantization back to 8-bit happens only when an
image is rendered.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np


class Rgb8(NamedTuple):
    r: int
    g: int
    b: int


class LabColor(NamedTuple):
    l: float
    a: float
    b: float


# sRGB (IEC 61966-2-1) primaries to XYZ, D65, 2-degree observer.
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
], dtype=np.float64)
_XYZ_TO_SRGB = np.linalg.inv(_SRGB_TO_XYZ)

# White point taken from the matrix row sums (not the rounded published
# values) so that (255,255,255) maps to exactly (100, 0, 0).
_WHITE = _SRGB_TO_XYZ.sum(axis=1)

_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0

# sRGB transfer-function breakpoints.
_SRGB_GAMMA_CUT = 0.04045
_LINEAR_CUT = 0.0031308

# Pre-linearized table for the 256 8-bit channel values.
_LINEAR_OF_U8 = np.empty(256, dtype=np.float64)
for _v in range(256):
    _u = _v / 255.0
    _LINEAR_OF_U8[_v] = _u / 12.92 if _u <= _SRGB_GAMMA_CUT else ((_u + 0.055) / 1.055) ** 2.4
del _u, _v


# White folded into the matrix so xyz comes out pre-normalized.
_XYZ_NORM = (_SRGB_TO_XYZ / _WHITE[:, None]).copy()
_XYZ_NORM_T = _XYZ_NORM.T.copy()


def linear_to_lab_array(lin: np.ndarray) -> np.ndarray:
    """Linear-light RGB (..., 3) in [0, 1] to Lab (..., 3) float64.

    Works in place on fresh buffers; pixels below the CIE epsilon (rare on
    real pages) take the linear branch in a masked fix-up pass.
    """
    shape = lin.shape
    xyz = lin.reshape(-1, 3) @ _XYZ_NORM_T
    small = xyz <= _EPS
    small_vals = xyz[small]
    f = np.cbrt(xyz, out=xyz)
    if small_vals.size:
        f[small] = (_KAPPA * small_vals + 16.0) / 116.0
    lab = np.empty_like(f)
    np.subtract(f[:, 0], f[:, 1], out=lab[:, 1])
    lab[:, 1] *= 500.0
    np.subtract(f[:, 1], f[:, 2], out=lab[:, 2])
    lab[:, 2] *= 200.0
    np.multiply(f[:, 1], 116.0, out=lab[:, 0])
    lab[:, 0] -= 16.0
    return lab.reshape(shape)


def srgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """uint8 sRGB array (..., 3) to Lab (..., 3) float64."""
    return linear_to_lab_array(_LINEAR_OF_U8[rgb])


def srgb01_to_lab_array(rgb01: np.ndarray) -> np.ndarray:
    """Float sRGB array (..., 3) in [0, 1] to Lab; used for non-8-bit inputs."""
    rgb01 = np.asarray(rgb01, dtype=np.float64)
    lin = np.where(rgb01 <= _SRGB_GAMMA_CUT, rgb01 / 12.92,
                   ((rgb01 + 0.055) / 1.055) ** 2.4)
    return linear_to_lab_array(lin)


def lab_to_srgb_array(lab: np.ndarray) -> np.ndarray:
    """Lab array (..., 3) to uint8 sRGB; out-of-gamut values clamp."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    f3 = f * f * f
    xyz = np.where(f3 > _EPS, f3, (116.0 * f - 16.0) / _KAPPA) * _WHITE
    lin = xyz @ _XYZ_TO_SRGB.T
    srgb = np.where(lin <= _LINEAR_CUT, 12.92 * lin,
                    1.055 * np.power(np.maximum(lin, 0.0), 1.0 / 2.4) - 0.055)
    return np.clip(np.round(srgb * 255.0), 0.0, 255.0).astype(np.uint8)


def srgb_to_lab(c: Rgb8) -> LabColor:
    """Convert one 8-bit sRGB color to Lab. Pure and deterministic."""
    lab = srgb_to_lab_array(np.array(c, dtype=np.uint8))
    return LabColor(float(lab[0]), float(lab[1]), float(lab[2]))


def lab_to_srgb(c: LabColor) -> Rgb8:
    """Convert a Lab color to 8-bit sRGB, clamping out-of-gamut inputs."""
    rgb = lab_to_srgb_array(np.array(c, dtype=np.float64))
    return Rgb8(int(rgb[0]), int(rgb[1]), int(rgb[2]))


def delta_e(x: LabColor, y: LabColor) -> float:
    """CIE76 color difference: Euclidean distance in Lab."""
    dl = x[0] - y[0]
    da = x[1] - y[1]
    db = x[2] - y[2]
    return math.sqrt(dl * dl + da * da + db * db)


class LabLut:
    """Quantized sRGB-to-Lab cache: 32 bins per channel, nearest bin center.

    Trades exactness for speed in throughput mode; exact conversion stays
    the default everywhere else.
    """

    BINS = 32

    def __init__(self) -> None:
        centers = (np.arange(self.BINS, dtype=np.float64) * 8.0 + 3.5) / 255.0
        grid = np.stack(np.meshgrid(centers, centers, centers, indexing="ij"), axis=-1)
        self._table = srgb01_to_lab_array(grid.reshape(-1, 3))

    def convert(self, rgb: np.ndarray) -> np.ndarray:
        """uint8 sRGB (..., 3) to approximate Lab via bin lookup."""
        q = (rgb >> 3).astype(np.int32)
        idx = (q[..., 0] << 10) | (q[..., 1] << 5) | q[..., 2]
        return self._table[idx]
