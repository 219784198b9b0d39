"""Batch application of a trained model over a manifest of scanned pages.

Documents fan out across a bounded worker pool; each yields a report row
(or an isolated error row) and flagged pages are routed to a retraining
queue instead of the normal plane output. Reports are line-delimited so
multi-thousand-page batches stream without buffering.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .cluster import ClusterConfig, PointSet, cluster_window
from .colorlab import srgb_to_lab_array
from .model import (ColorModel, UNKNOWN_LABEL, WindowProvenance,
                    add_training_window, fingerprint, new_model)
from .raster import load_image, save_png
from .segment import (NoveltyVerdict, SegmentOptions, extract_plane,
                      novelty_report, segment_image, write_label_map_png)

_ID_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class InputDataError(Exception):
    """Manifest, project, or output-directory problems caught before processing."""


@dataclass(frozen=True)
class ManifestEntry:
    doc: str
    path: Path


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    options: SegmentOptions
    out_dir: Path | None


@dataclass(frozen=True)
class DocRecord:
    doc: str
    ok: bool
    error: str | None = None
    histogram: dict[str, int] | None = None
    unknown_fraction: float | None = None
    flagged: bool | None = None
    timing_ms: float | None = None
    planes: tuple[str, ...] = ()
    label_map: str | None = None
    novelty: NoveltyVerdict | None = None


@dataclass(frozen=True)
class BatchReport:
    rows: tuple[DocRecord, ...]
    processed: int
    flagged: int
    errors: int
    model_fingerprint: str
    out_dir: Path
    report_path: Path


def default_seed() -> int:
    """Seed used when none is given; CHROMAPLANE_SEED overrides."""
    return int(os.environ.get("CHROMAPLANE_SEED", "0"))


def segment_options_from_dict(d: dict[str, Any]) -> SegmentOptions:
    allowed = {f for f in SegmentOptions.__dataclass_fields__}
    unknown = set(d) - allowed
    if unknown:
        raise InputDataError(f"unknown segmentation options: {sorted(unknown)}")
    try:
        return SegmentOptions(**d)
    except TypeError as e:
        raise InputDataError(f"bad segmentation options: {e}") from e


def _load_json(path: Path, what: str) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise InputDataError(f"no such {what} file: {path}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InputDataError(f"{what} file {path} is not valid JSON: {e}") from e


def load_manifest(path: str | Path, out_dir: str | Path | None = None) -> Manifest:
    """Read a batch manifest; relative document paths resolve from the manifest dir."""
    path = Path(path)
    doc = _load_json(path, "manifest")
    if not isinstance(doc, dict) or not isinstance(doc.get("documents"), list):
        raise InputDataError("manifest must be an object with a 'documents' list")
    base = path.parent
    entries = []
    seen: set[str] = set()
    for i, raw in enumerate(doc["documents"]):
        if not isinstance(raw, dict) or "id" not in raw or "path" not in raw:
            raise InputDataError(f"documents[{i}] must carry 'id' and 'path'")
        doc_id = str(raw["id"])
        if not _ID_RE.match(doc_id):
            raise InputDataError(f"document id {doc_id!r} may only use [A-Za-z0-9._-]")
        if doc_id in seen:
            raise InputDataError(f"duplicate document id {doc_id!r}")
        seen.add(doc_id)
        p = str(raw["path"])
        if not p:
            raise InputDataError(f"documents[{i}] has an empty path")
        entries.append(ManifestEntry(doc_id, (base / p).resolve() if not os.path.isabs(p) else Path(p)))
    options = segment_options_from_dict(doc.get("options", {}))
    chosen = out_dir if out_dir is not None else doc.get("out_dir")
    resolved = None
    if chosen is not None:
        resolved = Path(chosen)
        if not resolved.is_absolute():
            resolved = (base / resolved).resolve() if out_dir is None else resolved
    return Manifest(tuple(entries), options, resolved)


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label) or "_"


def _novelty_to_dict(n: NoveltyVerdict | None) -> dict[str, Any] | None:
    if n is None:
        return None
    return {
        "unknown_fraction": n.unknown_fraction,
        "suggestions": [
            {"lab": [s.lab.l, s.lab.a, s.lab.b], "count": s.count, "radius": s.radius}
            for s in n.suggestions
        ],
    }


def _record_to_dict(r: DocRecord) -> dict[str, Any]:
    if not r.ok:
        return {"doc": r.doc, "ok": False, "error": r.error}
    return {
        "doc": r.doc,
        "ok": True,
        "flagged": r.flagged,
        "unknown_fraction": r.unknown_fraction,
        "histogram": r.histogram,
        "timing_ms": r.timing_ms,
        "label_map": r.label_map,
        "planes": list(r.planes),
        "novelty": _novelty_to_dict(r.novelty),
    }


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def run_batch(m: ColorModel, man: Manifest, *, workers: int | None = None,
              write_planes: bool = True, planes_for_flagged: bool = False) -> BatchReport:
    """Segment every manifest entry, write outputs, and assemble the report.

    A failing document produces one error row and never aborts the batch.
    The report lands atomically at out_dir/report.jsonl once all rows exist.
    """
    if man.out_dir is None:
        raise InputDataError("batch needs an output directory (manifest out_dir or --out-dir)")
    out_dir = man.out_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise InputDataError(f"output directory is not writable: {e}") from e

    n_workers = max(1, workers if workers is not None else (os.cpu_count() or 1))
    opts = man.options
    if n_workers > 1 and opts.workers != 1:
        # Keep memory bounded: per-document parallelism off while documents
        # themselves run in parallel.
        opts = replace(opts, workers=1)

    fp = fingerprint(m)
    (out_dir / "labelmaps").mkdir(exist_ok=True)
    if write_planes:
        (out_dir / "planes").mkdir(exist_ok=True)

    def process(entry: ManifestEntry) -> DocRecord:
        try:
            img = load_image(entry.path)
            res = segment_image(m, img, opts)
            novelty = novelty_report(res, m) if res.flagged else None
            label_rel = f"labelmaps/{entry.doc}.png"
            write_label_map_png(res.labels, out_dir / label_rel)
            planes: list[str] = []
            if write_planes and (not res.flagged or planes_for_flagged):
                pdir = out_dir / "planes" / entry.doc
                pdir.mkdir(parents=True, exist_ok=True)
                for label in (*res.labels.legend, UNKNOWN_LABEL):
                    rel = f"planes/{entry.doc}/{_safe_name(label)}.png"
                    save_png(extract_plane(img, res.labels, label), out_dir / rel)
                    planes.append(rel)
            return DocRecord(doc=entry.doc, ok=True, histogram=res.histogram,
                             unknown_fraction=res.unknown_fraction, flagged=res.flagged,
                             timing_ms=res.timing_ms, planes=tuple(planes),
                             label_map=label_rel, novelty=novelty)
        except Exception as e:  # fault isolation: one bad page = one error row
            return DocRecord(doc=entry.doc, ok=False, error=f"{type(e).__name__}: {e}")

    if n_workers > 1 and len(man.entries) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = tuple(pool.map(process, man.entries))
    else:
        rows = tuple(process(e) for e in man.entries)

    flagged = sum(1 for r in rows if r.ok and r.flagged)
    errors = sum(1 for r in rows if not r.ok)
    lines = [json.dumps(_record_to_dict(r), ensure_ascii=False) for r in rows]
    lines.append(json.dumps({"summary": {
        "processed": len(rows), "flagged": flagged, "errors": errors,
        "model_fingerprint": fp}}, ensure_ascii=False))
    report_path = out_dir / "report.jsonl"
    _atomic_write(report_path, ("\n".join(lines) + "\n").encode("utf-8"))

    return BatchReport(rows=rows, processed=len(rows), flagged=flagged, errors=errors,
                       model_fingerprint=fp, out_dir=out_dir, report_path=report_path)


def route_flagged(r: BatchReport, path: str | Path | None = None) -> Path:
    """Write flagged documents and their suggested new colors to the retraining queue."""
    queue_path = Path(path) if path is not None else r.out_dir / "retrain_queue.json"
    entries = []
    for row in r.rows:
        if not (row.ok and row.flagged):
            continue
        novelty = _novelty_to_dict(row.novelty) or {"unknown_fraction": row.unknown_fraction,
                                                    "suggestions": []}
        entries.append({"doc": row.doc, **novelty})
    doc = {"model_fingerprint": r.model_fingerprint, "flagged": entries}
    _atomic_write(queue_path, (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8"))
    return queue_path


def _config_from_partial(d: dict[str, Any]) -> ClusterConfig:
    allowed = {f for f in ClusterConfig.__dataclass_fields__}
    unknown = set(d) - allowed
    if unknown:
        raise InputDataError(f"unknown config fields: {sorted(unknown)}")
    kv = dict(d)
    if "suggested_k" in kv:
        kv["suggested_k"] = tuple(kv["suggested_k"])
    try:
        return replace(ClusterConfig(), **kv)
    except TypeError as e:
        raise InputDataError(f"bad config: {e}") from e


def train_from_project(path: str | Path, *, seed_default: int | None = None,
                       on_window=None) -> ColorModel:
    """Non-interactive training: cluster and label every window in a project file.

    The project lists images, windows [x, y, w, h] with declared k, optional
    per-window seeds, and the centroid-index-to-label assignments. Windows
    apply in file order. Relative image paths resolve from the project dir.
    `on_window(index, window_dict, cluster_result, assignment)` is called per
    window so callers can echo the swatches the labels were applied to.
    """
    path = Path(path)
    doc = _load_json(path, "project")
    if not isinstance(doc, dict):
        raise InputDataError("project file must be a JSON object")
    cfg = _config_from_partial(doc.get("config", {}))
    base = path.parent

    images: dict[str, Path] = {}
    for i, raw in enumerate(doc.get("images", [])):
        if not isinstance(raw, dict) or "id" not in raw or "path" not in raw:
            raise InputDataError(f"images[{i}] must carry 'id' and 'path'")
        p = str(raw["path"])
        images[str(raw["id"])] = (base / p) if not os.path.isabs(p) else Path(p)

    fallback = seed_default if seed_default is not None else default_seed()
    m = new_model(cfg)
    cache: dict[str, Any] = {}
    windows = doc.get("windows", [])
    if not isinstance(windows, list):
        raise InputDataError("project 'windows' must be a list")
    for i, win in enumerate(windows):
        where = f"windows[{i}]"
        if not isinstance(win, dict):
            raise InputDataError(f"{where} must be an object")
        doc_id = str(win.get("doc", ""))
        if doc_id not in images:
            raise InputDataError(f"{where} references unknown image id {doc_id!r}")
        rect = win.get("rect")
        if not (isinstance(rect, list) and len(rect) == 4
                and all(isinstance(v, int) for v in rect)):
            raise InputDataError(f"{where}.rect must be [x, y, w, h] integers")
        k = win.get("k")
        if not isinstance(k, int):
            raise InputDataError(f"{where}.k must be an integer")
        labels = win.get("labels")
        if not isinstance(labels, dict):
            raise InputDataError(f"{where}.labels must map centroid index to label")
        try:
            asg = {int(idx): str(lbl) for idx, lbl in labels.items()}
        except ValueError as e:
            raise InputDataError(f"{where}.labels keys must be integers: {e}") from e
        seed = win.get("seed", fallback)
        if not isinstance(seed, int):
            raise InputDataError(f"{where}.seed must be an integer")

        if doc_id not in cache:
            cache[doc_id] = load_image(images[doc_id])
        img = cache[doc_id]
        x, y, w, h = rect
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > img.width or y + h > img.height:
            raise InputDataError(
                f"{where}.rect {rect} exceeds image {doc_id!r} ({img.width}x{img.height})")
        pixels = srgb_to_lab_array(img.pixels[y:y + h, x:x + w].reshape(-1, 3))
        cr = cluster_window(PointSet(pixels), k, seed, cfg)
        m = add_training_window(m, WindowProvenance(doc_id, (x, y, w, h), k, seed), cr, asg)
        if on_window is not None:
            on_window(i, win, cr, asg)
    return m
