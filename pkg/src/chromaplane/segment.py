"""Full-page classification against a color model.

Every pixel is converted to Lab once and assigned to the globally nearest
centroid; pixels farther than that centroid's acceptance radius become
UNKNOWN. A page whose UNKNOWN fraction exceeds the flag threshold is routed
out of automatic processing.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colorlab import LabColor, LabLut, srgb_to_lab_array
from .cluster import PointSet, cluster_window
from .model import ColorModel, UNKNOWN_LABEL
from .raster import Image, save_gray_png

UNKNOWN_INDEX = 255

# Rows per work unit. Fixed so that the per-pixel arithmetic is identical
# no matter how many workers split the page.
_CHUNK_ROWS = 128

_LUT_CACHE: LabLut | None = None

try:
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:  # pure-numpy fallback; slower but identical results
    _HAVE_NUMBA = False


def _classify_block_numpy(lab: np.ndarray, cents: np.ndarray, radii: np.ndarray,
                          owner: np.ndarray) -> np.ndarray:
    """Reference classification of (n, 3) Lab rows; first minimum wins ties."""
    n = lab.shape[0]
    bd = np.full(n, np.inf)
    best = np.zeros(n, dtype=np.int64)
    for j in range(cents.shape[0]):
        dl = lab[:, 0] - cents[j, 0]
        d2 = dl * dl
        da = lab[:, 1] - cents[j, 1]
        d2 += da * da
        db = lab[:, 2] - cents[j, 2]
        d2 += db * db
        better = d2 < bd
        bd[better] = d2[better]
        best[better] = j
    within = np.sqrt(bd) <= radii[best]
    return np.where(within, owner[best], np.uint8(UNKNOWN_INDEX))


if _HAVE_NUMBA:
    from .colorlab import _EPS as _CIE_EPS
    from .colorlab import _KAPPA as _CIE_KAPPA
    from .colorlab import _LINEAR_OF_U8, _XYZ_NORM

    @_njit(cache=True, nogil=True)
    def _classify_block_jit(lab, cents, radii, owner, out):  # pragma: no cover - jit
        n = lab.shape[0]
        c = cents.shape[0]
        for i in range(n):
            pl = lab[i, 0]
            pa = lab[i, 1]
            pb = lab[i, 2]
            bd = np.inf
            best = 0
            for j in range(c):
                dl = pl - cents[j, 0]
                da = pa - cents[j, 1]
                db = pb - cents[j, 2]
                d2 = dl * dl + da * da + db * db
                if d2 < bd:
                    bd = d2
                    best = j
            if math.sqrt(bd) <= radii[best]:
                out[i] = owner[best]
            else:
                out[i] = UNKNOWN_INDEX

    @_njit(cache=True, nogil=True)
    def _segment_rows_jit(rgb, lut, nm, cents, radii, owner, out):  # pragma: no cover - jit
        # Single pass per pixel: linearize, to XYZ, to Lab, nearest centroid.
        # np.cbrt here may differ from the numpy ufunc by one ulp, which can
        # only matter for pixels exactly on a radius or tie boundary.
        n = rgb.shape[0]
        c = cents.shape[0]
        for i in range(n):
            lr = lut[rgb[i, 0]]
            lg = lut[rgb[i, 1]]
            lb = lut[rgb[i, 2]]
            x = nm[0, 0] * lr + nm[0, 1] * lg + nm[0, 2] * lb
            y = nm[1, 0] * lr + nm[1, 1] * lg + nm[1, 2] * lb
            z = nm[2, 0] * lr + nm[2, 1] * lg + nm[2, 2] * lb
            fx = np.cbrt(x) if x > _CIE_EPS else (_CIE_KAPPA * x + 16.0) / 116.0
            fy = np.cbrt(y) if y > _CIE_EPS else (_CIE_KAPPA * y + 16.0) / 116.0
            fz = np.cbrt(z) if z > _CIE_EPS else (_CIE_KAPPA * z + 16.0) / 116.0
            pl = 116.0 * fy - 16.0
            pa = 500.0 * (fx - fy)
            pb = 200.0 * (fy - fz)
            bd = np.inf
            best = 0
            for j in range(c):
                dl = pl - cents[j, 0]
                da = pa - cents[j, 1]
                db = pb - cents[j, 2]
                d2 = dl * dl + da * da + db * db
                if d2 < bd:
                    bd = d2
                    best = j
            if math.sqrt(bd) <= radii[best]:
                out[i] = owner[best]
            else:
                out[i] = UNKNOWN_INDEX


def _classify_block(lab: np.ndarray, cents: np.ndarray, radii: np.ndarray,
                    owner: np.ndarray) -> np.ndarray:
    if _HAVE_NUMBA:
        out = np.empty(lab.shape[0], dtype=np.uint8)
        _classify_block_jit(lab, cents, radii, owner, out)
        return out
    return _classify_block_numpy(lab, cents, radii, owner)


class EmptyModelError(ValueError):
    """Classification was requested against a model with no centroids."""


@dataclass(frozen=True)
class SegmentOptions:
    smooth_radius: int = 0
    flag_threshold: float = 0.01
    radius_override: float | None = None
    use_lut: bool = False
    workers: int = 1
    unknown_sample_cap: int = 50_000


@dataclass
class LabelMap:
    """Per-pixel class indices; legend maps index -> class label, UNKNOWN=255."""

    labels: np.ndarray
    legend: tuple[str, ...]

    def __post_init__(self) -> None:
        a = np.asarray(self.labels)
        if a.ndim != 2 or a.dtype != np.uint8:
            raise ValueError("labels must be a (h, w) uint8 array")
        self.labels = a
        self.legend = tuple(self.legend)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def label_at_index(self, idx: int) -> str:
        if idx == UNKNOWN_INDEX:
            return UNKNOWN_LABEL
        return self.legend[idx]


@dataclass
class SegmentationResult:
    labels: LabelMap
    histogram: dict[str, int]
    unknown_fraction: float
    flagged: bool
    timing_ms: float
    # Deterministic subsample of UNKNOWN pixels in Lab, for novelty analysis.
    unknown_sample: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))


@dataclass(frozen=True)
class NoveltySuggestion:
    lab: LabColor
    count: int
    radius: float


@dataclass(frozen=True)
class NoveltyVerdict:
    flagged: bool
    unknown_fraction: float
    suggestions: tuple[NoveltySuggestion, ...]


def _flatten_model(m: ColorModel) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[str, ...]]:
    """Centroids in (class index, centroid index) order, plus radii and owners."""
    cents: list[tuple[float, float, float]] = []
    radii: list[float] = []
    owner: list[int] = []
    for ci, cls in enumerate(m.classes):
        for e in cls.centroids:
            cents.append(tuple(e.lab))
            radii.append(e.radius)
            owner.append(ci)
    if not cents:
        raise EmptyModelError("the model defines no centroids")
    return (np.array(cents, dtype=np.float64),
            np.array(radii, dtype=np.float64),
            np.array(owner, dtype=np.int64),
            m.class_labels())


def classify_pixel(m: ColorModel, c: LabColor,
                   radius_override: float | None = None) -> tuple[str, float]:
    """Nearest-centroid verdict for one Lab color.

    Returns (class label, distance) when the nearest centroid accepts the
    pixel, else (UNKNOWN, distance to the nearest centroid). Ties go to the
    lower class index, then the lower centroid index.
    """
    cents, radii, owner, legend = _flatten_model(m)
    p = np.asarray(tuple(c), dtype=np.float64)
    diff = cents - p
    d2 = (diff * diff).sum(axis=1)
    i = int(np.argmin(d2))
    dist = math.sqrt(float(d2[i]))
    limit = radii[i] if radius_override is None else radius_override
    if dist <= limit:
        return legend[owner[i]], dist
    return UNKNOWN_LABEL, dist


def segment_image(m: ColorModel, img: Image,
                  opt: SegmentOptions = SegmentOptions()) -> SegmentationResult:
    """Classify every pixel of a page and derive the flagged verdict.

    The output is identical whether the fixed row chunks are processed
    sequentially or by several workers.
    """
    t0 = time.perf_counter()
    cents, radii, owner, legend = _flatten_model(m)
    h, w = img.pixels.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("cannot segment an empty image")
    if h * w > 2**31:
        raise ValueError(f"image of {h}x{w} pixels exceeds the supported size")
    if len(legend) >= UNKNOWN_INDEX:
        raise ValueError(f"models with more than {UNKNOWN_INDEX} classes are not supported")

    if opt.radius_override is not None:
        radii = np.full_like(radii, float(opt.radius_override))

    lut = None
    if opt.use_lut:
        global _LUT_CACHE
        if _LUT_CACHE is None:
            _LUT_CACHE = LabLut()
        lut = _LUT_CACHE

    owner_u8 = owner.astype(np.uint8)
    label_arr = np.empty((h, w), dtype=np.uint8)
    chunks = [(y, min(y + _CHUNK_ROWS, h)) for y in range(0, h, _CHUNK_ROWS)]

    def run_chunk(bounds: tuple[int, int]) -> None:
        y0, y1 = bounds
        rows = img.pixels[y0:y1]
        if _HAVE_NUMBA and lut is None:
            flat = rows.reshape(-1, 3)
            out = np.empty(flat.shape[0], dtype=np.uint8)
            _segment_rows_jit(flat, _LINEAR_OF_U8, _XYZ_NORM, cents, radii, owner_u8, out)
        else:
            lab = (lut.convert(rows) if lut is not None else srgb_to_lab_array(rows))
            out = _classify_block(lab.reshape(-1, 3), cents, radii, owner_u8)
        label_arr[y0:y1] = out.reshape(y1 - y0, w)

    if opt.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=opt.workers) as pool:
            list(pool.map(run_chunk, chunks))
    else:
        for bounds in chunks:
            run_chunk(bounds)

    lm = LabelMap(label_arr, legend)
    if opt.smooth_radius > 0:
        lm = smooth_labels(lm, opt.smooth_radius)

    counts = np.bincount(lm.labels.ravel(), minlength=256)
    histogram = {legend[i]: int(counts[i]) for i in range(len(legend))}
    histogram[UNKNOWN_LABEL] = int(counts[UNKNOWN_INDEX])
    total = h * w
    unknown_fraction = counts[UNKNOWN_INDEX] / total
    flagged = unknown_fraction > opt.flag_threshold

    unknown_sample = np.zeros((0, 3))
    n_unknown = int(counts[UNKNOWN_INDEX])
    if n_unknown and opt.unknown_sample_cap > 0:
        flat_idx = np.flatnonzero(lm.labels.ravel() == UNKNOWN_INDEX)
        stride = -(-flat_idx.size // opt.unknown_sample_cap)
        sel = flat_idx[::stride][:opt.unknown_sample_cap]
        unknown_sample = srgb_to_lab_array(img.pixels.reshape(-1, 3)[sel])

    timing_ms = (time.perf_counter() - t0) * 1000.0
    return SegmentationResult(labels=lm, histogram=histogram,
                              unknown_fraction=float(unknown_fraction),
                              flagged=bool(flagged), timing_ms=timing_ms,
                              unknown_sample=unknown_sample)


def _box_counts(mask: np.ndarray, r: int) -> np.ndarray:
    """Count of true cells in the (2r+1)^2 window around each cell, clipped."""
    h, w = mask.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask, axis=0, dtype=np.int64), axis=1, out=ii[1:, 1:])
    ys = np.arange(h)
    xs = np.arange(w)
    y_lo = np.clip(ys - r, 0, h)
    y_hi = np.clip(ys + r + 1, 0, h)
    x_lo = np.clip(xs - r, 0, w)
    x_hi = np.clip(xs + r + 1, 0, w)
    return (ii[y_hi][:, x_hi] - ii[y_lo][:, x_hi]
            - ii[y_hi][:, x_lo] + ii[y_lo][:, x_lo])


def smooth_labels(lm: LabelMap, radius: int) -> LabelMap:
    """One majority-vote pass over (2r+1)^2 neighborhoods.

    UNKNOWN votes like any other label. A pixel keeps its own label when it
    ties for the majority or when the majority itself is tied.
    """
    if radius < 1:
        raise ValueError(f"smoothing radius must be >= 1, got {radius}")
    labels = lm.labels
    present = np.unique(labels)
    if present.size <= 1:
        return LabelMap(labels.copy(), lm.legend)

    counts = np.stack([_box_counts(labels == v, radius) for v in present])
    max_count = counts.max(axis=0)
    ties_at_max = (counts == max_count).sum(axis=0)

    slot_of = np.zeros(256, dtype=np.int64)
    slot_of[present] = np.arange(present.size)
    own_slot = slot_of[labels]
    own_count = np.take_along_axis(counts, own_slot[None, :, :], axis=0)[0]

    winner = present[np.argmax(counts, axis=0)].astype(np.uint8)
    keep = (own_count == max_count) | (ties_at_max > 1)
    return LabelMap(np.where(keep, labels, winner), lm.legend)


def extract_plane(img: Image, lm: LabelMap, label: str,
                  style: str = "original-on-white") -> Image:
    """Render one class as its own page: source colors or a black mask on white."""
    if img.pixels.shape[:2] != lm.labels.shape:
        raise ValueError("image and label map dimensions differ")
    if label == UNKNOWN_LABEL:
        idx = UNKNOWN_INDEX
    elif label in lm.legend:
        idx = lm.legend.index(label)
    else:
        raise ValueError(f"unknown label {label!r}; known: {list(lm.legend)} + UNKNOWN")
    if style not in ("original-on-white", "mask"):
        raise ValueError(f"unknown plane style {style!r}")

    mask = lm.labels == idx
    out = np.full_like(img.pixels, 255)
    if style == "original-on-white":
        out[mask] = img.pixels[mask]
    else:
        out[mask] = 0
    return Image(out)


def novelty_report(r: SegmentationResult, m: ColorModel) -> NoveltyVerdict:
    """Summarize UNKNOWN pixels as up to three suggested new-class seeds."""
    if r.histogram.get(UNKNOWN_LABEL, 0) == 0 or r.unknown_sample.shape[0] == 0:
        return NoveltyVerdict(r.flagged, r.unknown_fraction, ())
    sample = r.unknown_sample
    distinct = np.unique(sample, axis=0).shape[0]
    k = min(3, distinct)
    res = cluster_window(PointSet(sample), k, seed=0, cfg=m.config)
    assert res.radii is not None
    suggestions = tuple(
        NoveltySuggestion(LabColor(*(float(v) for v in res.centroids[j])),
                          int(res.counts[j]), float(res.radii[j]))
        for j in range(res.k))
    return NoveltyVerdict(r.flagged, r.unknown_fraction, suggestions)


def write_label_map_png(lm: LabelMap, path: str | Path) -> Path:
    """Write the indices as a gray PNG plus a legend sidecar; returns the sidecar path."""
    import json

    path = Path(path)
    save_gray_png(lm.labels, path)
    sidecar = path.with_name(path.stem + ".legend.json")
    sidecar.write_text(json.dumps(
        {"legend": list(lm.legend), "unknown_index": UNKNOWN_INDEX},
        indent=2) + "\n", encoding="utf-8")
    return sidecar
