"""REST facade for the interactive training loop.

The operator uploads pages, clusters windows, names the resulting swatches,
previews planes, and saves the model; every mutation persists to the data
directory so a training session survives restarts. All color math happens
server-side; swatches go out in both Lab and sRGB hex.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading
import uuid
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from .cluster import ClusterResult, PointSet, cluster_window
from .colorlab import lab_to_srgb, LabColor, srgb_to_lab_array
from .model import (ColorModel, ModelError, ModelFormatError, ModelInvariantError,
                    UNKNOWN_LABEL, UnsupportedVersionError, WindowProvenance,
                    add_training_window, deserialize, new_model, serialize,
                    validate_model)
from .raster import Image, ImageIOError, decode_image_bytes, downscale_nearest, encode_png
from .segment import SegmentOptions, extract_plane, segment_image

MAX_UPLOAD_BYTES = 64 * 2**20
PREVIEW_MAX_WIDTH = 1000
THUMB_MAX_WIDTH = 240


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


class _Session:
    def __init__(self, sid: str, root: Path | None):
        self.id = sid
        self.root = root
        self.lock = threading.RLock()
        self.model: ColorModel = new_model()
        self.documents: dict[str, Image] = {}
        self.doc_order: list[str] = []
        self.pending: dict[str, dict[str, Any]] = {}
        self.seed_counter = 0
        self.retrain_queue: list[dict[str, Any]] = []

    # -- persistence ---------------------------------------------------

    def _write(self, name: str, data: bytes) -> None:
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / (name + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(self.root / name)

    def persist_model(self) -> None:
        self._write("model.cpm.json", serialize(self.model))

    def persist_meta(self) -> None:
        meta = {"seed_counter": self.seed_counter, "documents": self.doc_order,
                "retrain_queue": self.retrain_queue}
        self._write("meta.json", json.dumps(meta).encode("utf-8"))

    def persist_pending(self) -> None:
        out = {}
        for pid, p in self.pending.items():
            r: ClusterResult = p["result"]
            out[pid] = {
                "doc": p["doc"], "rect": list(p["rect"]), "k": p["k"], "seed": p["seed"],
                "centroids": r.centroids.tolist(), "counts": r.counts.tolist(),
                "radii": r.radii.tolist() if r.radii is not None else None,
                "inertia": r.inertia, "iterations": r.iterations,
            }
        self._write("pending.json", json.dumps(out).encode("utf-8"))

    def persist_document(self, doc_id: str, raw: bytes) -> None:
        if self.root is None:
            return
        docs = self.root / "documents"
        docs.mkdir(parents=True, exist_ok=True)
        (docs / f"{doc_id}.img").write_bytes(raw)

    @classmethod
    def restore(cls, sid: str, root: Path) -> "_Session":
        s = cls(sid, root)
        model_file = root / "model.cpm.json"
        if model_file.exists():
            s.model = deserialize(model_file.read_bytes())
        meta_file = root / "meta.json"
        if meta_file.exists():
            meta = json.loads(meta_file.read_text(encoding="utf-8"))
            s.seed_counter = int(meta.get("seed_counter", 0))
            s.doc_order = [str(d) for d in meta.get("documents", [])]
            s.retrain_queue = list(meta.get("retrain_queue", []))
        for doc_id in s.doc_order:
            raw = (root / "documents" / f"{doc_id}.img").read_bytes()
            s.documents[doc_id] = decode_image_bytes(raw)
        pending_file = root / "pending.json"
        if pending_file.exists():
            for pid, p in json.loads(pending_file.read_text(encoding="utf-8")).items():
                s.pending[pid] = {
                    "doc": p["doc"], "rect": tuple(p["rect"]), "k": p["k"], "seed": p["seed"],
                    "result": ClusterResult(
                        centroids=np.array(p["centroids"], dtype=np.float64),
                        counts=np.array(p["counts"], dtype=np.int64),
                        radii=None if p["radii"] is None else np.array(p["radii"]),
                        inertia=float(p["inertia"]), iterations=int(p["iterations"]),
                        seed=p["seed"]),
                }
        return s


class SessionStore:
    def __init__(self, data_dir: Path | None):
        self.data_dir = data_dir
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def _session_root(self, sid: str) -> Path | None:
        return None if self.data_dir is None else self.data_dir / "sessions" / sid

    def create(self) -> _Session:
        sid = uuid.uuid4().hex[:12]
        s = _Session(sid, self._session_root(sid))
        with self._lock:
            self._sessions[sid] = s
        s.persist_model()
        s.persist_meta()
        return s

    def get(self, sid: str) -> _Session:
        with self._lock:
            if sid in self._sessions:
                return self._sessions[sid]
        root = self._session_root(sid)
        if root is not None and root.is_dir():
            s = _Session.restore(sid, root)
            with self._lock:
                self._sessions.setdefault(sid, s)
                return self._sessions[sid]
        raise ApiError(404, "unknown_session", f"no session {sid!r}")


def _hex_of_lab(lab: LabColor) -> str:
    r, g, b = lab_to_srgb(lab)
    return f"#{r:02x}{g:02x}{b:02x}"


def _b64_png(img: Image) -> str:
    return base64.b64encode(encode_png(img)).decode("ascii")


def _model_summary(m: ColorModel) -> dict[str, Any]:
    warnings = [i.message for i in validate_model(m) if i.severity == "warning"]
    return {
        "classes": [{"label": c.label, "centroids": len(c.centroids)} for c in m.classes],
        "total_centroids": m.total_centroids(),
        "warnings": warnings,
    }


def create_app(data_dir: str | Path | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    """Build the service; state persists under data_dir when one is given."""
    app = FastAPI(title="chromaplane service")
    store = SessionStore(Path(data_dir) if data_dir is not None else None)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={
            "code": exc.code, "message": exc.message, "details": exc.details})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=422, content={
            "code": "validation_error", "message": "request body failed validation",
            "details": exc.errors()})

    @app.post("/sessions", status_code=201)
    def create_session() -> dict[str, str]:
        return {"session_id": store.create().id}

    @app.post("/sessions/{sid}/documents")
    async def upload_document(sid: str, request: Request) -> Response:
        sess = store.get(sid)
        raw = await request.body()
        if len(raw) > MAX_UPLOAD_BYTES:
            raise ApiError(413, "too_large",
                           f"upload of {len(raw)} bytes exceeds the {MAX_UPLOAD_BYTES} byte limit")
        try:
            img = decode_image_bytes(raw)
        except ImageIOError as e:
            raise ApiError(400, "undecodable", str(e))
        doc_id = hashlib.sha256(raw).hexdigest()[:16]
        with sess.lock:
            created = doc_id not in sess.documents
            if created:
                sess.documents[doc_id] = img
                sess.doc_order.append(doc_id)
                sess.persist_document(doc_id, raw)
                sess.persist_meta()
        body = {"document_id": doc_id, "width": img.width, "height": img.height}
        return Response(content=json.dumps(body), media_type="application/json",
                        status_code=201 if created else 200)

    def _get_doc(sess: _Session, did: str) -> Image:
        with sess.lock:
            img = sess.documents.get(did)
        if img is None:
            raise ApiError(404, "unknown_document", f"no document {did!r} in this session")
        return img

    @app.get("/sessions/{sid}/documents/{did}/image")
    def get_document_image(sid: str, did: str) -> Response:
        img = _get_doc(store.get(sid), did)
        return Response(content=encode_png(img), media_type="image/png")

    @app.post("/sessions/{sid}/documents/{did}/cluster")
    def cluster_document_window(sid: str, did: str, body: dict = None) -> dict[str, Any]:
        sess = store.get(sid)
        img = _get_doc(sess, did)
        body = body or {}
        rect = body.get("rect")
        k = body.get("k")
        if (not isinstance(rect, list) or len(rect) != 4
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in rect)):
            raise ApiError(422, "bad_rect", "rect must be [x, y, w, h] integers")
        x, y, w, h = rect
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > img.width or y + h > img.height:
            raise ApiError(422, "rect_out_of_bounds",
                           f"rect {rect} does not fit the {img.width}x{img.height} image")
        with sess.lock:
            cfg = sess.model.config
            if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= cfg.k_max:
                raise ApiError(422, "bad_k", f"k must be an integer in [1, {cfg.k_max}], got {k!r}")
            seed = body.get("seed")
            if seed is None:
                seed = sess.seed_counter
                sess.seed_counter += 1
            elif not isinstance(seed, int) or isinstance(seed, bool):
                raise ApiError(422, "bad_seed", "seed must be an integer")
            pixels = srgb_to_lab_array(img.pixels[y:y + h, x:x + w].reshape(-1, 3))
            try:
                result = cluster_window(PointSet(pixels), k, seed, cfg)
            except ValueError as e:
                raise ApiError(422, "cluster_failed", str(e))
            pid = uuid.uuid4().hex[:12]
            sess.pending[pid] = {"doc": did, "rect": (x, y, w, h), "k": k,
                                 "seed": seed, "result": result}
            sess.persist_pending()
            sess.persist_meta()
        assert result.radii is not None
        centroids = []
        for j in range(result.k):
            lab = LabColor(*(float(v) for v in result.centroids[j]))
            centroids.append({
                "index": j,
                "lab": [lab.l, lab.a, lab.b],
                "srgb_hex": _hex_of_lab(lab),
                "count": int(result.counts[j]),
                "radius": float(result.radii[j]),
            })
        return {"pending_id": pid, "seed": seed, "k": k, "centroids": centroids}

    @app.post("/sessions/{sid}/pending/{pid}/labels")
    def commit_labels(sid: str, pid: str, body: dict = None) -> dict[str, Any]:
        sess = store.get(sid)
        body = body or {}
        raw_asg = body.get("assignments")
        if not isinstance(raw_asg, dict):
            raise ApiError(422, "bad_assignments",
                           "assignments must map centroid indices to labels")
        try:
            asg = {int(idx): str(lbl) for idx, lbl in raw_asg.items()}
        except ValueError:
            raise ApiError(422, "bad_assignments", "assignment keys must be integers")
        with sess.lock:
            p = sess.pending.get(pid)
            if p is None:
                raise ApiError(404, "unknown_pending",
                               f"no pending cluster result {pid!r} (already committed?)")
            try:
                updated = add_training_window(
                    sess.model,
                    WindowProvenance(p["doc"], p["rect"], p["k"], p["seed"]),
                    p["result"], asg)
            except ValueError as e:
                raise ApiError(422, "bad_assignments", str(e))
            sess.model = updated
            del sess.pending[pid]
            sess.persist_model()
            sess.persist_pending()
        return _model_summary(updated)

    @app.get("/sessions/{sid}/preview/{did}")
    def preview_document(sid: str, did: str, full: bool = False) -> dict[str, Any]:
        sess = store.get(sid)
        img = _get_doc(sess, did)
        with sess.lock:
            m = sess.model
        if m.is_empty():
            raise ApiError(409, "empty_model", "train at least one window before previewing")
        view, scale = (img, 1) if full else downscale_nearest(img, PREVIEW_MAX_WIDTH)
        res = segment_image(m, view, SegmentOptions())
        planes = []
        for label in (*res.labels.legend, UNKNOWN_LABEL):
            plane = extract_plane(img=view, lm=res.labels, label=label)
            thumb, _ = downscale_nearest(plane, THUMB_MAX_WIDTH)
            planes.append({"label": label, "count": res.histogram[label],
                           "png": _b64_png(thumb)})
        label_png = base64.b64encode(_gray_png_bytes(res.labels.labels)).decode("ascii")
        return {
            "width": view.width, "height": view.height, "scale": scale,
            "histogram": res.histogram, "unknown_fraction": res.unknown_fraction,
            "flagged": res.flagged, "legend": list(res.labels.legend),
            "label_map_png": label_png, "planes": planes,
        }

    @app.get("/sessions/{sid}/model")
    def get_model(sid: str) -> Response:
        sess = store.get(sid)
        with sess.lock:
            data = serialize(sess.model)
        return Response(content=data, media_type="application/json", headers={
            "Content-Disposition": 'attachment; filename="model.cpm.json"'})

    @app.put("/sessions/{sid}/model")
    async def put_model(sid: str, request: Request) -> dict[str, Any]:
        sess = store.get(sid)
        raw = await request.body()
        try:
            m = deserialize(raw)
        except UnsupportedVersionError as e:
            raise ApiError(422, "unsupported_version", str(e))
        except ModelFormatError as e:
            raise ApiError(422, "model_format", str(e))
        except ModelInvariantError as e:
            raise ApiError(422, "model_invariant", str(e))
        except ModelError as e:
            raise ApiError(422, "model_error", str(e))
        with sess.lock:
            sess.model = m
            sess.persist_model()
        return _model_summary(m)

    @app.post("/sessions/{sid}/retrain-queue")
    def ingest_retrain_queue(sid: str, body: dict = None) -> dict[str, Any]:
        sess = store.get(sid)
        body = body or {}
        flagged = body.get("flagged")
        if not isinstance(flagged, list):
            raise ApiError(422, "bad_queue", "queue must carry a 'flagged' list")
        entries = []
        suggestions = 0
        for i, e in enumerate(flagged):
            if not isinstance(e, dict) or "doc" not in e:
                raise ApiError(422, "bad_queue", f"flagged[{i}] must carry a 'doc' id")
            sugg = e.get("suggestions", [])
            if not isinstance(sugg, list):
                raise ApiError(422, "bad_queue", f"flagged[{i}].suggestions must be a list")
            suggestions += len(sugg)
            entries.append({"doc": str(e["doc"]),
                            "unknown_fraction": e.get("unknown_fraction"),
                            "suggestions": sugg})
        with sess.lock:
            sess.retrain_queue = entries
            sess.persist_meta()
        return {"accepted": len(entries), "suggestions": suggestions}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _gray_png_bytes(plane: np.ndarray) -> bytes:
    import io

    from PIL import Image as PilImage
    buf = io.BytesIO()
    PilImage.fromarray(plane, mode="L").save(buf, format="PNG")
    return buf.getvalue()
