"""Command-line entry point: train, segment, batch, inspect, serve, synth.

Exit codes: 0 success, 1 usage, 2 input error, 3 processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .colorlab import LabColor, lab_to_srgb
from .model import ModelError, deserialize, serialize, validate_model
from .pipeline import (InputDataError, Manifest, default_seed, load_manifest,
                       route_flagged, run_batch, train_from_project)
from .raster import ImageIOError, load_image, save_png
from .segment import (SegmentOptions, UNKNOWN_LABEL, extract_plane,
                      segment_image, write_label_map_png)
from .synth import DegradationSpec, degrade, generate_document, page_spec_from_dict, with_seed


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise _UsageError(message)


def _load_model(path: str):
    p = Path(path)
    try:
        data = p.read_bytes()
    except FileNotFoundError:
        raise InputDataError(f"no such model file: {p}")
    return deserialize(data)


def _parse_degrade(text: str) -> DegradationSpec:
    sigma = 0.0
    quality = 100
    block = False
    for token in filter(None, text.split(",")):
        if "=" not in token:
            raise argparse.ArgumentTypeError(f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        try:
            if key == "sigma":
                sigma = float(value)
            elif key in ("q", "quality"):
                quality = int(value)
            elif key == "block":
                block = value not in ("0", "false", "no")
            else:
                raise argparse.ArgumentTypeError(f"unknown degrade key {key!r}")
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value for {key!r}: {value!r}")
    return DegradationSpec(gaussian_sigma=sigma, jpeg_quality=quality, block_artifact=block)


def cmd_train(args: argparse.Namespace) -> int:
    def echo_window(i, win, cr, asg):
        # Swatches per window so misassigned labels are easy to spot and fix.
        print(f"window {i} doc={win['doc']} rect={win['rect']} k={win['k']}:")
        for j in range(cr.k):
            lab = LabColor(*(float(v) for v in cr.centroids[j]))
            r, g, b = lab_to_srgb(lab)
            print(f"  [{j}] -> {asg[j]:<16s} #{r:02x}{g:02x}{b:02x} "
                  f"lab=({lab.l:6.1f},{lab.a:6.1f},{lab.b:6.1f}) "
                  f"count={int(cr.counts[j])}")

    m = train_from_project(args.project, on_window=echo_window)
    Path(args.out).write_bytes(serialize(m))
    print(f"wrote {args.out}: {len(m.classes)} classes, {m.total_centroids()} centroids")
    for issue in validate_model(m):
        print(f"  {issue.severity}: {issue.message}")
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    m = _load_model(args.model)
    img = load_image(args.image)
    opts = SegmentOptions(smooth_radius=args.smooth, flag_threshold=args.flag_threshold,
                          workers=args.workers)
    res = segment_image(m, img, opts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label in (*res.labels.legend, UNKNOWN_LABEL):
        save_png(extract_plane(img, res.labels, label), out / f"{label}.png")
    write_label_map_png(res.labels, out / "labels.png")
    summary = {"histogram": res.histogram, "unknown_fraction": res.unknown_fraction,
               "flagged": res.flagged, "timing_ms": res.timing_ms}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    verdict = "FLAGGED" if res.flagged else "ok"
    print(f"{args.image}: {verdict} unknown={res.unknown_fraction:.4f} "
          f"({res.timing_ms:.0f} ms)")
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    m = _load_model(args.model)
    man = load_manifest(args.manifest, out_dir=args.out_dir)
    if man.out_dir is None:
        man = Manifest(man.entries, man.options, Path(args.out_dir))
    report = run_batch(m, man, workers=args.workers)
    queue = route_flagged(report)
    print(f"processed {report.processed}, flagged {report.flagged}, "
          f"errors {report.errors}")
    print(f"report: {report.report_path}")
    print(f"retrain queue: {queue}")
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    m = _load_model(args.model)
    print(f"model version {m.version} ({m.colorspace}), "
          f"{len(m.classes)} classes, {m.total_centroids()} centroids, "
          f"{len(m.provenance)} training windows")
    for cls in m.classes:
        print(f"  {cls.label}:")
        for e in cls.centroids:
            print(f"    lab=({e.lab.l:7.2f},{e.lab.a:7.2f},{e.lab.b:7.2f}) "
                  f"radius={e.radius:6.2f} weight={e.weight}")
    issues = validate_model(m)
    if issues:
        print("issues:")
        for issue in issues:
            print(f"  {issue.severity}: {issue.message}")
    else:
        print("no validation issues")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(data_dir=args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_synth_gen(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputDataError(f"no such spec file: {args.spec}")
    except json.JSONDecodeError as e:
        raise InputDataError(f"spec file is not valid JSON: {e}")
    spec = page_spec_from_dict(doc)
    base_seed = spec.seed if spec.seed else default_seed()
    out = Path(args.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    documents = []
    for i in range(args.count):
        page = with_seed(spec, base_seed + i)
        img, truth = generate_document(page)
        if args.degrade is not None:
            img = degrade(img, replace(args.degrade, seed=page.seed))
        doc_id = f"p{i:03d}"
        save_png(img, out / "images" / f"{doc_id}.png")
        write_label_map_png(truth, out / "truth" / f"{doc_id}.png")
        documents.append({"id": doc_id, "path": f"images/{doc_id}.png"})
    manifest = {"documents": documents}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"generated {args.count} pages under {out} (manifest.json included)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="chromaplane",
                     description="Operator-trained color segmentation of scanned documents")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="build a model from a project file")
    p.add_argument("--project", required=True, help="project JSON (images, windows, labels)")
    p.add_argument("--out", required=True, help="output model file (.cpm.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="segment one page into color planes")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--smooth", type=int, default=0, metavar="R",
                   help="majority-vote smoothing radius (default off)")
    p.add_argument("--flag-threshold", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("batch", help="segment every document in a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("inspect", help="print classes, centroids, and validation issues")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("serve", help="start the training service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default=None, help="directory for persisted sessions")
    p.add_argument("--ui-dir", default=None, help="static trainer UI to serve under /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="synthetic test corpora")
    synth_sub = p.add_subparsers(dest="synth_command", required=True)
    g = synth_sub.add_parser("gen", help="generate pages with ground truth + manifest")
    g.add_argument("--spec", required=True, help="page spec JSON")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--degrade", type=_parse_degrade, default=None,
                   metavar="sigma=5,q=75[,block=1]")
    g.set_defaults(func=cmd_synth_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (InputDataError, ImageIOError, ModelError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        raise
    except Exception as e:
        print(f"processing error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
