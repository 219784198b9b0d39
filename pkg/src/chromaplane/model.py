"""Named color classes built from training windows, persisted as .cpm.json.

A class (background, printed text, stamp ink, ...) may hold several
centroids: gradients and re-training legitimately span multiple color
modes, and classification is nearest-centroid across all classes anyway.
Models are immutable values; every edit returns a successor.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

from .cluster import ClusterConfig, ClusterResult
from .colorlab import LabColor, delta_e

MODEL_VERSION = 1
SUPPORTED_VERSIONS = (1,)
COLORSPACE = "lab-d65"

# Reserved for pixels outside every acceptance radius; never a class label.
UNKNOWN_LABEL = "UNKNOWN"

# Inter-class centroid distance below which classification is ambiguous.
AMBIGUITY_WARN_DELTA_E = 5.0


class ModelError(Exception):
    """Base for model file problems."""


class ModelFormatError(ModelError):
    """The document is not a syntactically valid model file."""


class UnsupportedVersionError(ModelError):
    """The document declares a version this build cannot read."""


class ModelInvariantError(ModelError):
    """The document parses but violates model invariants."""


@dataclass(frozen=True)
class CentroidEntry:
    lab: LabColor
    radius: float
    weight: int


@dataclass(frozen=True)
class ColorClass:
    label: str
    centroids: tuple[CentroidEntry, ...]


@dataclass(frozen=True)
class WindowProvenance:
    doc: str
    rect: tuple[int, int, int, int]
    k: int
    seed: int


@dataclass(frozen=True)
class ColorModel:
    version: int
    colorspace: str
    config: ClusterConfig
    classes: tuple[ColorClass, ...]
    provenance: tuple[WindowProvenance, ...]

    def class_labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def total_centroids(self) -> int:
        return sum(len(c.centroids) for c in self.classes)

    def is_empty(self) -> bool:
        return self.total_centroids() == 0


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    code: str
    message: str


def new_model(cfg: ClusterConfig = ClusterConfig()) -> ColorModel:
    return ColorModel(version=MODEL_VERSION, colorspace=COLORSPACE, config=cfg,
                      classes=(), provenance=())


def _check_label(label: str) -> str:
    if not isinstance(label, str) or not label:
        raise ValueError("class labels must be non-empty strings")
    if label == UNKNOWN_LABEL:
        raise ValueError(f"{UNKNOWN_LABEL!r} is reserved for unclassified pixels")
    return label


def merge_centroids(c: ColorClass, eps: float) -> ColorClass:
    """Collapse centroids closer than eps into their weight-weighted mean.

    Always merges the globally closest pair (ties to the lower index pair),
    so the result does not depend on insertion order. The merged radius is
    the max of the pair, the merged weight their sum.
    """
    if eps < 0:
        raise ValueError(f"merge epsilon must be >= 0, got {eps}")
    entries = list(c.centroids)
    while len(entries) > 1:
        best: tuple[float, int, int] | None = None
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                d = delta_e(entries[i].lab, entries[j].lab)
                if d < eps and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is None:
            break
        _, i, j = best
        a, b = entries[i], entries[j]
        w = a.weight + b.weight
        lab = LabColor(*((a.weight * a.lab[t] + b.weight * b.lab[t]) / w for t in range(3)))
        entries[i] = CentroidEntry(lab, max(a.radius, b.radius), w)
        del entries[j]
    return ColorClass(c.label, tuple(entries))


def add_training_window(m: ColorModel, win: WindowProvenance, cr: ClusterResult,
                        asg: Mapping[int, str]) -> ColorModel:
    """Fold one labeled cluster result into the model.

    `asg` must map every centroid index of `cr` to a class label; new labels
    create classes. Affected classes are re-merged under the model's merge
    epsilon. Returns the successor model; `m` is untouched.
    """
    if cr.radii is None:
        raise ValueError("cluster result has no radii; produce it via cluster_window")
    k = cr.k
    keys = set(asg.keys())
    expected = set(range(k))
    if keys != expected:
        missing = sorted(expected - keys)
        extra = sorted(keys - expected)
        raise ValueError(
            f"assignment must cover centroid indices 0..{k - 1} exactly"
            + (f"; missing {missing}" if missing else "")
            + (f"; unexpected {extra}" if extra else ""))

    by_label: dict[str, list[CentroidEntry]] = {c.label: list(c.centroids) for c in m.classes}
    order: list[str] = [c.label for c in m.classes]
    touched: set[str] = set()
    for idx in range(k):
        label = _check_label(asg[idx])
        entry = CentroidEntry(
            lab=LabColor(*(float(v) for v in cr.centroids[idx])),
            radius=float(cr.radii[idx]),
            weight=max(1, int(cr.counts[idx])),
        )
        if label not in by_label:
            by_label[label] = []
            order.append(label)
        by_label[label].append(entry)
        touched.add(label)

    classes = []
    for label in order:
        cls = ColorClass(label, tuple(by_label[label]))
        if label in touched:
            cls = merge_centroids(cls, m.config.merge_eps)
        classes.append(cls)
    return replace(m, classes=tuple(classes), provenance=m.provenance + (win,))


def validate_model(m: ColorModel) -> list[ValidationIssue]:
    """Diagnostics: structural errors plus classification-ambiguity warnings."""
    issues: list[ValidationIssue] = []

    def err(code: str, message: str) -> None:
        issues.append(ValidationIssue("error", code, message))

    def warn(code: str, message: str) -> None:
        issues.append(ValidationIssue("warning", code, message))

    if m.version not in SUPPORTED_VERSIONS:
        err("version", f"unsupported version {m.version}")
    if m.colorspace != COLORSPACE:
        err("colorspace", f"colorspace must be {COLORSPACE!r}, got {m.colorspace!r}")

    seen: set[str] = set()
    for cls in m.classes:
        if not cls.label or cls.label == UNKNOWN_LABEL:
            err("label", f"invalid class label {cls.label!r}")
        if cls.label in seen:
            err("label", f"duplicate class label {cls.label!r}")
        seen.add(cls.label)
        if not cls.centroids:
            err("empty-class", f"class {cls.label!r} has no centroids")
        for e in cls.centroids:
            if not all(math.isfinite(v) for v in e.lab):
                err("centroid", f"class {cls.label!r} has a non-finite centroid")
            if e.radius < 0 or not math.isfinite(e.radius):
                err("radius", f"class {cls.label!r} has invalid radius {e.radius}")
            if e.weight < 1:
                err("weight", f"class {cls.label!r} has invalid weight {e.weight}")

    flat = [(ci, cls.label, e) for ci, cls in enumerate(m.classes) for e in cls.centroids]
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            ci, li, ei = flat[i]
            cj, lj, ej = flat[j]
            if ci == cj:
                continue
            d = delta_e(ei.lab, ej.lab)
            if d == 0.0:
                err("coincident", f"classes {li!r} and {lj!r} share an identical centroid")
            elif d < AMBIGUITY_WARN_DELTA_E:
                warn("ambiguous",
                     f"centroids of {li!r} and {lj!r} are only {d:.2f} dE apart")
            if 0.0 < d < ei.radius + ej.radius:
                warn("radius-overlap",
                     f"acceptance radii of {li!r} and {lj!r} overlap ({d:.2f} dE apart, "
                     f"radii {ei.radius:.2f} + {ej.radius:.2f})")
    return issues


def _config_to_dict(cfg: ClusterConfig) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def _config_from_dict(d: Any) -> ClusterConfig:
    if not isinstance(d, dict):
        raise ModelFormatError("config must be an object")
    names = {f.name for f in fields(ClusterConfig)}
    unknown = set(d) - names
    if unknown:
        raise ModelFormatError(f"unknown config fields: {sorted(unknown)}")
    missing = names - set(d)
    if missing:
        raise ModelFormatError(f"missing config fields: {sorted(missing)}")
    kv = dict(d)
    kv["suggested_k"] = tuple(kv["suggested_k"])
    try:
        return ClusterConfig(**kv)
    except TypeError as e:
        raise ModelFormatError(f"bad config: {e}") from e


def serialize(m: ColorModel) -> bytes:
    """Canonical UTF-8 JSON; identical models yield identical bytes."""
    doc = {
        "version": m.version,
        "colorspace": m.colorspace,
        "config": _config_to_dict(m.config),
        "classes": [
            {
                "label": cls.label,
                "centroids": [
                    {"lab": [e.lab.l, e.lab.a, e.lab.b],
                     "radius": e.radius,
                     "weight": e.weight}
                    for e in cls.centroids
                ],
            }
            for cls in m.classes
        ],
        "provenance": [
            {"doc": p.doc, "rect": list(p.rect), "k": p.k, "seed": p.seed}
            for p in m.provenance
        ],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _require(d: dict, key: str, kind: type, where: str) -> Any:
    if key not in d:
        raise ModelFormatError(f"{where} is missing field {key!r}")
    v = d[key]
    if kind is float:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ModelFormatError(f"{where}.{key} must be a number")
        return float(v)
    if not isinstance(v, kind) or isinstance(v, bool) and kind is int:
        raise ModelFormatError(f"{where}.{key} must be of type {kind.__name__}")
    return v


def deserialize(data: bytes | str) -> ColorModel:
    """Parse and validate a model file; raises a distinct error per failure class."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"model file is not UTF-8: {e}") from e
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must be a JSON object")

    version = doc.get("version")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(
            f"unsupported model version {version!r}; supported versions: "
            + ", ".join(str(v) for v in SUPPORTED_VERSIONS))

    known = {"version", "colorspace", "config", "classes", "provenance"}
    unknown = set(doc) - known
    if unknown:
        raise ModelFormatError(f"unknown top-level fields: {sorted(unknown)}")

    colorspace = _require(doc, "colorspace", str, "model")
    cfg = _config_from_dict(doc.get("config"))

    raw_classes = doc.get("classes")
    if not isinstance(raw_classes, list):
        raise ModelFormatError("classes must be a list")
    classes = []
    for ci, rc in enumerate(raw_classes):
        if not isinstance(rc, dict):
            raise ModelFormatError(f"classes[{ci}] must be an object")
        label = _require(rc, "label", str, f"classes[{ci}]")
        raw_cents = rc.get("centroids")
        if not isinstance(raw_cents, list):
            raise ModelFormatError(f"classes[{ci}].centroids must be a list")
        cents = []
        for ei, re_ in enumerate(raw_cents):
            where = f"classes[{ci}].centroids[{ei}]"
            if not isinstance(re_, dict):
                raise ModelFormatError(f"{where} must be an object")
            lab = re_.get("lab")
            if (not isinstance(lab, list) or len(lab) != 3
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in lab)):
                raise ModelFormatError(f"{where}.lab must be [l, a, b]")
            radius = _require(re_, "radius", float, where)
            weight = _require(re_, "weight", int, where)
            cents.append(CentroidEntry(LabColor(*(float(v) for v in lab)), radius, int(weight)))
        classes.append(ColorClass(label, tuple(cents)))

    raw_prov = doc.get("provenance")
    if not isinstance(raw_prov, list):
        raise ModelFormatError("provenance must be a list")
    provenance = []
    for pi, rp in enumerate(raw_prov):
        where = f"provenance[{pi}]"
        if not isinstance(rp, dict):
            raise ModelFormatError(f"{where} must be an object")
        rect = rp.get("rect")
        if (not isinstance(rect, list) or len(rect) != 4
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in rect)):
            raise ModelFormatError(f"{where}.rect must be [x, y, w, h] integers")
        provenance.append(WindowProvenance(
            doc=_require(rp, "doc", str, where),
            rect=tuple(rect),
            k=int(_require(rp, "k", int, where)),
            seed=int(_require(rp, "seed", int, where)),
        ))

    m = ColorModel(version=int(version), colorspace=colorspace, config=cfg,
                   classes=tuple(classes), provenance=tuple(provenance))
    errors = [i for i in validate_model(m) if i.severity == "error"]
    if errors:
        raise ModelInvariantError("; ".join(i.message for i in errors))
    return m


def fingerprint(m: ColorModel) -> str:
    """Content hash of the serialized model, used to stamp batch reports."""
    return hashlib.sha256(serialize(m)).hexdigest()
