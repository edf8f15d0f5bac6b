"""Local HTTP service exposing segmentation sessions to UI clients.

Sessions live in memory behind opaque ids and expire after an idle TTL.
Mutations (segment, edit) are serialized per session by a non-blocking
exclusive guard — a concurrent mutation gets 409 — while read endpoints
serve the last committed artifact snapshot and never touch live state.
"""

from __future__ import annotations

import base64
import io
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image

from .config import Config
from .errors import DecodeError, NcCutError
from .imagegraph import RgbImage, load_image, save_mask_png, slico
from .pipeline import apply_edit, init_session, segment, trace_json
from .viz import boundary_polylines, region_centroids, region_value_image

MAX_PIXELS_ENV = "NCCUT_MAX_PIXELS"
SESSION_TTL_ENV = "NCCUT_SESSION_TTL"


@dataclass(frozen=True)
class ServerConfig:
    max_pixels: int = 4_000_000
    session_ttl: float = 1800.0          # idle seconds before expiry
    config: Config = field(default_factory=Config)

    @staticmethod
    def from_env() -> "ServerConfig":
        return ServerConfig(
            max_pixels=int(os.environ.get(MAX_PIXELS_ENV, "4000000")),
            session_ttl=float(os.environ.get(SESSION_TTL_ENV, "1800")))


class SessionEntry:
    """One uploaded image plus its mutable segmentation state."""

    def __init__(self, image: RgbImage):
        self.image = image
        self.lock = threading.Lock()
        self.last_used = time.monotonic()
        self.regions = None              # cached RegionMap for superpixels
        self.superpixels = None          # cached payload
        self.seg = None                  # live SegSession (mutation-only)
        self.committed = {}              # snapshot read endpoints serve


class SessionStore:
    """id -> SessionEntry with idle expiry."""

    def __init__(self, ttl: float):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._entries = {}

    def sweep(self, now: float = None) -> None:
        now = time.monotonic() if now is None else now
        with self._lock:
            dead = [sid for sid, entry in self._entries.items()
                    if now - entry.last_used > self.ttl]
            for sid in dead:
                del self._entries[sid]

    def create(self, image: RgbImage) -> str:
        sid = uuid.uuid4().hex
        with self._lock:
            self._entries[sid] = SessionEntry(image)
        return sid

    def get(self, sid: str) -> SessionEntry | None:
        self.sweep()
        with self._lock:
            entry = self._entries.get(sid)
            if entry is not None:
                entry.last_used = time.monotonic()
            return entry

    def delete(self, sid: str) -> bool:
        with self._lock:
            return self._entries.pop(sid, None) is not None

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _png_bytes(array) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse({"detail": detail}, status_code=status)


def _commit(session, mask, trace) -> dict:
    labels = session.regions.labels
    return {
        "mask_png": save_mask_png(mask),
        "iterations": len(trace),
        "trace": json.loads(trace_json(trace)),
        "ncmap_png": _png_bytes(region_value_image(labels, session.nc.T)),
        "imap_png": _png_bytes(region_value_image(labels, session.nc.I)),
        "candidates": {
            "p_obj": sorted(int(r) for r in session.candidates.p_obj),
            "p_bkg": sorted(int(r) for r in session.candidates.p_bkg),
        },
    }


def _mask_response(committed: dict) -> dict:
    return {
        "mask": base64.b64encode(committed["mask_png"]).decode("ascii"),
        "iterations": committed["iterations"],
        "trace": committed["trace"],
    }


def _parse_strokes(payload):
    strokes = payload.get("strokes")
    if not isinstance(strokes, list):
        raise ValueError("strokes must be a list")
    parsed = []
    for stroke in strokes:
        if not isinstance(stroke, dict):
            raise ValueError("each stroke must be an object")
        path = stroke.get("path")
        if not isinstance(path, list):
            raise ValueError("stroke path must be a list of [x, y]")
        parsed.append(([(float(p[0]), float(p[1])) for p in path],
                       stroke.get("label")))
    return parsed


def _session_config(base: Config, payload: dict) -> Config:
    config = base
    overrides = payload.get("config")
    if overrides is not None:
        if not isinstance(overrides, dict):
            raise ValueError("config must be an object")
        config = config.with_updates(**overrides)
    if payload.get("nc_cut0"):
        config = config.with_updates(indeterminacy_enabled=False)
    return config


def create_app(server_config: ServerConfig = None,
               static_dir=None) -> FastAPI:
    cfg = server_config if server_config is not None else ServerConfig.from_env()
    store = SessionStore(cfg.session_ttl)
    app = FastAPI(title="nccut", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.server_config = cfg
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, "malformed request body")

    @app.post("/sessions")
    async def create_session(request: Request):
        data = await request.body()
        try:
            image = load_image(data)
        except DecodeError as exc:
            return _error(400, str(exc))
        if image.n_pixels > cfg.max_pixels:
            return _error(413,
                          f"image exceeds the {cfg.max_pixels} pixel limit")
        sid = store.create(image)
        return {"id": sid, "width": image.width, "height": image.height}

    @app.get("/sessions/{sid}/superpixels")
    def superpixels(sid: str):
        entry = store.get(sid)
        if entry is None:
            return _error(404, "unknown session")
        if entry.superpixels is not None:
            return entry.superpixels
        with entry.lock:
            if entry.superpixels is None:
                try:
                    regions = (entry.seg.regions if entry.seg is not None
                               else slico(entry.image, cfg.config.n_regions))
                except NcCutError as exc:
                    return _error(400, str(exc))
                entry.regions = regions
                centroids = region_centroids(regions.labels,
                                             regions.n_regions)
                entry.superpixels = {
                    "width": entry.image.width,
                    "height": entry.image.height,
                    "n_regions": int(regions.n_regions),
                    "polylines": [[list(p) for p in line]
                                  for line in
                                  boundary_polylines(regions.labels)],
                    "regions": [
                        {"id": i, "centroid": [float(x), float(y)],
                         "pixels": int(count)}
                        for i, ((x, y), count) in enumerate(
                            zip(centroids, regions.pixel_counts))],
                }
            return entry.superpixels

    @app.post("/sessions/{sid}/segment")
    def run_segment(sid: str, payload: dict = Body(...)):
        entry = store.get(sid)
        if entry is None:
            return _error(404, "unknown session")
        polygon = payload.get("polygon")
        if polygon is None:
            return _error(400, "missing polygon")
        if not entry.lock.acquire(blocking=False):
            return _error(409, "session busy")
        try:
            config = _session_config(cfg.config, payload)
            session = init_session(entry.image,
                                   [tuple(v) for v in polygon], config)
            mask, trace = segment(session)
            entry.seg = session
            entry.committed = _commit(session, mask, trace)
        except NcCutError as exc:
            return _error(400, str(exc))
        except (TypeError, ValueError) as exc:
            return _error(400, f"malformed request: {exc}")
        finally:
            entry.lock.release()
        return _mask_response(entry.committed)

    @app.post("/sessions/{sid}/edit")
    def run_edit(sid: str, payload: dict = Body(...)):
        entry = store.get(sid)
        if entry is None:
            return _error(404, "unknown session")
        if not entry.lock.acquire(blocking=False):
            return _error(409, "session busy")
        try:
            if entry.seg is None:
                return _error(409, "session has no segmentation to edit")
            strokes = _parse_strokes(payload)
            mask, trace = apply_edit(entry.seg, strokes)
            entry.committed = _commit(entry.seg, mask, trace)
        except NcCutError as exc:
            return _error(400, str(exc))
        except (TypeError, ValueError, IndexError) as exc:
            return _error(400, f"malformed request: {exc}")
        finally:
            entry.lock.release()
        return _mask_response(entry.committed)

    def committed_artifact(sid: str, key: str):
        entry = store.get(sid)
        if entry is None:
            return None, _error(404, "unknown session")
        artifact = entry.committed.get(key)
        if artifact is None:
            return None, _error(409, "session not segmented yet")
        return artifact, None

    @app.get("/sessions/{sid}/ncmap")
    def ncmap(sid: str, kind: str = "truth"):
        if kind not in ("truth", "indeterminacy"):
            return _error(400, "kind must be truth or indeterminacy")
        key = "ncmap_png" if kind == "truth" else "imap_png"
        artifact, failure = committed_artifact(sid, key)
        if failure is not None:
            return failure
        return Response(content=artifact, media_type="image/png")

    @app.get("/sessions/{sid}/candidates")
    def candidates(sid: str):
        artifact, failure = committed_artifact(sid, "candidates")
        if failure is not None:
            return failure
        return artifact

    @app.get("/sessions/{sid}/mask")
    def mask(sid: str):
        artifact, failure = committed_artifact(sid, "mask_png")
        if failure is not None:
            return failure
        return Response(content=artifact, media_type="image/png")

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        if not store.delete(sid):
            return _error(404, "unknown session")
        return {"deleted": True}

    if static_dir is None:
        candidate = os.path.join(os.path.dirname(os.path.dirname(
            os.path.dirname(os.path.abspath(__file__)))), "frontend", "dist")
        static_dir = candidate if os.path.isdir(candidate) else None
    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=static_dir, html=True),
                  name="studio")
    return app
