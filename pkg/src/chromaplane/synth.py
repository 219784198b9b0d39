"""Synthetic administrative pages with exact per-pixel ground truth.

Pages are painted from a seeded spec (gradient background, rectangles,
discs, text-like stroke fields) so segmentation quality can be scored
instead of eyeballed. The degradation step reproduces the two dominant
scan defects: per-channel Gaussian noise and a JPEG encode/decode round
trip that mixes colors along edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .raster import Image, decode_image_bytes, encode_jpeg
from .segment import LabelMap, UNKNOWN_INDEX
from .model import UNKNOWN_LABEL


@dataclass(frozen=True)
class Background:
    top: tuple[int, int, int]
    bottom: tuple[int, int, int] | None = None  # None = solid
    label: str = "background"


@dataclass(frozen=True)
class Element:
    shape: str  # "rect" | "disc" | "strokes"
    label: str
    color: tuple[int, int, int]
    rect: tuple[int, int, int, int] | None = None  # rect and strokes area
    center: tuple[int, int] | None = None  # disc
    radius: int = 0  # disc
    count: int = 120  # strokes
    thickness: int = 3  # strokes
    length: tuple[int, int] = (15, 60)  # strokes


@dataclass(frozen=True)
class PageSpec:
    width: int
    height: int
    background: Background
    elements: tuple[Element, ...]
    seed: int = 0


@dataclass(frozen=True)
class DegradationSpec:
    gaussian_sigma: float | tuple[float, float, float] = 0.0
    jpeg_quality: int = 100
    block_artifact: bool = False
    seed: int = 0


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    support: int


@dataclass(frozen=True)
class ScoreReport:
    accuracy: float
    per_class: dict[str, ClassScore]
    unknown_excluded: bool


def _check_rect(rect: tuple[int, int, int, int], spec: PageSpec, what: str) -> None:
    x, y, w, h = rect
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > spec.width or y + h > spec.height:
        raise ValueError(f"{what} rect {rect} exceeds the {spec.width}x{spec.height} page")


def _validate(spec: PageSpec) -> None:
    if spec.width < 1 or spec.height < 1:
        raise ValueError("page must be at least 1x1")
    for el in spec.elements:
        if el.label == UNKNOWN_LABEL:
            raise ValueError(f"{UNKNOWN_LABEL!r} cannot be used as a ground-truth label")
        if el.shape in ("rect", "strokes"):
            if el.rect is None:
                raise ValueError(f"{el.shape} element needs a rect")
            _check_rect(el.rect, spec, el.shape)
        elif el.shape == "disc":
            if el.center is None or el.radius < 1:
                raise ValueError("disc element needs a center and positive radius")
            cx, cy = el.center
            r = el.radius
            if cx - r < 0 or cy - r < 0 or cx + r >= spec.width or cy + r >= spec.height:
                raise ValueError(
                    f"disc at {el.center} r={r} exceeds the {spec.width}x{spec.height} page")
        else:
            raise ValueError(f"unknown element shape {el.shape!r}")


def _paint_strokes(canvas: np.ndarray, truth: np.ndarray, el: Element,
                   idx: int, rng: np.random.Generator) -> None:
    x, y, w, h = el.rect  # type: ignore[misc]
    half = max(0, el.thickness // 2)
    lo, hi = el.length
    color = np.array(el.color, dtype=np.uint8)
    for _ in range(el.count):
        x0 = int(rng.integers(x, x + w))
        y0 = int(rng.integers(y, y + h))
        angle = float(rng.uniform(0.0, math.pi))
        length = int(rng.integers(lo, hi + 1))
        steps = max(2, length * 2)
        ts = np.linspace(0.0, 1.0, steps)
        xs = np.rint(x0 + ts * length * math.cos(angle)).astype(np.int64)
        ys = np.rint(y0 + ts * length * math.sin(angle)).astype(np.int64)
        for dy in range(-half, half + 1):
            for dx in range(-half, half + 1):
                px = np.clip(xs + dx, x, x + w - 1)
                py = np.clip(ys + dy, y, y + h - 1)
                canvas[py, px] = color
                truth[py, px] = idx


def generate_document(spec: PageSpec) -> tuple[Image, LabelMap]:
    """Render a page and the label map of what painted each pixel."""
    _validate(spec)
    h, w = spec.height, spec.width

    legend: list[str] = [spec.background.label]
    for el in spec.elements:
        if el.label not in legend:
            legend.append(el.label)
    if len(legend) >= UNKNOWN_INDEX:
        raise ValueError("too many distinct labels for a uint8 truth map")

    bg = spec.background
    top = np.array(bg.top, dtype=np.float64)
    if bg.bottom is None:
        canvas = np.empty((h, w, 3), dtype=np.uint8)
        canvas[:] = np.array(bg.top, dtype=np.uint8)
    else:
        bottom = np.array(bg.bottom, dtype=np.float64)
        t = np.linspace(0.0, 1.0, h)[:, None] if h > 1 else np.zeros((1, 1))
        rows = np.rint(top[None, :] + t * (bottom - top)[None, :]).astype(np.uint8)
        canvas = np.repeat(rows[:, None, :], w, axis=1)
    truth = np.zeros((h, w), dtype=np.uint8)

    rng = np.random.default_rng(spec.seed)
    for el in spec.elements:
        idx = legend.index(el.label)
        if el.shape == "rect":
            x, y, rw, rh = el.rect  # type: ignore[misc]
            canvas[y:y + rh, x:x + rw] = np.array(el.color, dtype=np.uint8)
            truth[y:y + rh, x:x + rw] = idx
        elif el.shape == "disc":
            cx, cy = el.center  # type: ignore[misc]
            r = el.radius
            yy, xx = np.ogrid[cy - r:cy + r + 1, cx - r:cx + r + 1]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            region = (slice(cy - r, cy + r + 1), slice(cx - r, cx + r + 1))
            canvas[region][mask] = np.array(el.color, dtype=np.uint8)
            truth[region][mask] = idx
        else:
            _paint_strokes(canvas, truth, el, idx, rng)

    return Image(canvas), LabelMap(truth, tuple(legend))


# DC offset applied per 8x8 block when block artifacts are requested.
_BLOCK_DC_SIGMA = 2.5


def degrade(img: Image, d: DegradationSpec) -> Image:
    """Seeded Gaussian channel noise, then a JPEG round trip at the given quality."""
    if not 1 <= d.jpeg_quality <= 100:
        raise ValueError(f"jpeg_quality must lie in [1, 100], got {d.jpeg_quality}")
    sigma = np.broadcast_to(np.asarray(d.gaussian_sigma, dtype=np.float64), (3,))
    if sigma.min() < 0:
        raise ValueError("gaussian_sigma must be non-negative")

    rng = np.random.default_rng(d.seed)
    arr = img.pixels.astype(np.float64)
    if sigma.max() > 0:
        arr = arr + rng.standard_normal(arr.shape) * sigma
    if d.block_artifact:
        h, w = arr.shape[:2]
        bh, bw = -(-h // 8), -(-w // 8)
        offsets = rng.normal(0.0, _BLOCK_DC_SIGMA, size=(bh, bw, 3))
        arr = arr + np.repeat(np.repeat(offsets, 8, axis=0), 8, axis=1)[:h, :w]
    noisy = Image(np.clip(np.rint(arr), 0, 255).astype(np.uint8))
    return decode_image_bytes(encode_jpeg(noisy, d.jpeg_quality))


def score(predicted: LabelMap, truth: LabelMap, exclude_unknown: bool = False) -> ScoreReport:
    """Pixel accuracy and per-class precision/recall, matched by label name.

    A predicted UNKNOWN never counts as correct. With exclude_unknown=True
    the accuracy denominator drops pixels the prediction left UNKNOWN.
    """
    if predicted.labels.shape != truth.labels.shape:
        raise ValueError(
            f"dimension mismatch: predicted {predicted.labels.shape} "
            f"vs truth {truth.labels.shape}")

    names: list[str] = []
    for name in (*truth.legend, *predicted.legend):
        if name not in names:
            names.append(name)
    unknown_gid = len(names)

    def to_global(lm: LabelMap) -> np.ndarray:
        lut = np.full(256, unknown_gid, dtype=np.int64)
        for i, name in enumerate(lm.legend):
            lut[i] = names.index(name)
        return lut[lm.labels]

    gp = to_global(predicted)
    gt = to_global(truth)
    match = (gp == gt) & (gp != unknown_gid)

    total = gt.size
    if exclude_unknown:
        denom = int((gp != unknown_gid).sum())
        accuracy = float(match.sum() / denom) if denom else 0.0
    else:
        accuracy = float(match.sum() / total)

    per_class: dict[str, ClassScore] = {}
    for name in truth.legend:
        gid = names.index(name)
        in_truth = gt == gid
        support = int(in_truth.sum())
        if support == 0:
            continue
        correct = int((match & in_truth).sum())
        predicted_n = int((gp == gid).sum())
        per_class[name] = ClassScore(
            precision=correct / predicted_n if predicted_n else 0.0,
            recall=correct / support,
            support=support)

    return ScoreReport(accuracy=accuracy, per_class=per_class,
                       unknown_excluded=exclude_unknown)


def page_spec_from_dict(doc: dict[str, Any]) -> PageSpec:
    """Build a PageSpec from its JSON form (the `synth gen --spec` file)."""
    try:
        bg = doc["background"]
        background = Background(
            top=tuple(bg["top"]),
            bottom=tuple(bg["bottom"]) if bg.get("bottom") is not None else None,
            label=bg.get("label", "background"))
        elements = []
        for el in doc.get("elements", []):
            elements.append(Element(
                shape=el["shape"],
                label=el["label"],
                color=tuple(el["color"]),
                rect=tuple(el["rect"]) if el.get("rect") is not None else None,
                center=tuple(el["center"]) if el.get("center") is not None else None,
                radius=int(el.get("radius", 0)),
                count=int(el.get("count", 120)),
                thickness=int(el.get("thickness", 3)),
                length=tuple(el.get("length", (15, 60))),
            ))
        return PageSpec(width=int(doc["width"]), height=int(doc["height"]),
                        background=background, elements=tuple(elements),
                        seed=int(doc.get("seed", 0)))
    except (KeyError, TypeError) as e:
        raise ValueError(f"invalid page spec: {e}") from e


def with_seed(spec: PageSpec, seed: int) -> PageSpec:
    return replace(spec, seed=seed)
