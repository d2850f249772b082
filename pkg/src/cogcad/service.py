"""HTTP ingestion service for live trace capture.

Endpoints:
    GET  /health
    POST /sessions                 ingest a SessionRecord, derive attention
    GET  /sessions/{session_id}    stored record
    POST /sessions/{session_id}/label   write-once diagnosis label
    GET  /maps/{session_id}        derived soft map, VCCA bytes
    GET  /overlay/{image_id}/{session_id}   base image blended with the map
    GET  /images/{image_id}        base image bytes
    POST /images/{image_id}        register a grayscale PNG
"""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .errors import ValidationError
from .gridio import grid_bytes
from .store import DuplicateConflict, NotFound, SessionStore


def heat_color(v: np.ndarray) -> np.ndarray:
    """Fixed colormap: black -> red -> yellow -> white as v goes 0 -> 1."""
    r = np.clip(3.0 * v, 0.0, 1.0)
    g = np.clip(3.0 * v - 1.0, 0.0, 1.0)
    b = np.clip(3.0 * v - 2.0, 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def compose_overlay(base: np.ndarray, soft: np.ndarray, opacity: float = 0.6) -> bytes:
    """Alpha-blend the colorized map over a grayscale base; returns PNG bytes.

    Per-pixel alpha is opacity * map value, so a zero map returns the base
    image unchanged.
    """
    from PIL import Image

    base = np.clip(np.asarray(base, dtype=np.float64), 0.0, 1.0)
    soft = np.asarray(soft, dtype=np.float64)
    if soft.shape != base.shape:
        # nearest-neighbor resample onto the image grid
        ry = (np.arange(base.shape[0]) * soft.shape[0] // base.shape[0]).clip(0, soft.shape[0] - 1)
        rx = (np.arange(base.shape[1]) * soft.shape[1] // base.shape[1]).clip(0, soft.shape[1] - 1)
        soft = soft[np.ix_(ry, rx)]
    alpha = (opacity * np.clip(soft, 0.0, 1.0))[..., None]
    rgb = (1.0 - alpha) * base[..., None] + alpha * heat_color(soft)
    img = Image.fromarray((rgb * 255.0 + 0.5).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": {"code": code, "message": message, **extra}}, status_code=status)


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="cogcad trace ingestion")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions")
    async def post_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "VALIDATION", "body is not valid JSON")
        try:
            return store.ingest(body)
        except DuplicateConflict as exc:
            return _error(409, exc.code, str(exc))
        except ValidationError as exc:
            extra = {"index": exc.index} if exc.index is not None else {}
            return _error(400, exc.code, str(exc), **extra)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return store.get_session(session_id)
        except NotFound as exc:
            return _error(404, exc.code, str(exc))

    @app.post("/sessions/{session_id}/label")
    async def post_label(session_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "VALIDATION", "body is not valid JSON")
        if not isinstance(body, dict) or "label" not in body:
            return _error(400, "VALIDATION", "missing field 'label'")
        try:
            return store.set_label(session_id, body["label"])
        except NotFound as exc:
            return _error(404, exc.code, str(exc))
        except DuplicateConflict as exc:
            return _error(409, exc.code, str(exc))

    @app.get("/maps/{session_id}")
    def get_map(session_id: str):
        try:
            grid = store.get_map(session_id)
        except NotFound as exc:
            return _error(404, exc.code, str(exc))
        return Response(content=grid_bytes(grid), media_type="application/octet-stream")

    @app.get("/overlay/{image_id}/{session_id}")
    def get_overlay(image_id: str, session_id: str):
        try:
            base = store.get_image(image_id)
            soft = store.get_map(session_id)
        except NotFound as exc:
            return _error(404, exc.code, str(exc))
        return Response(content=compose_overlay(base, soft), media_type="image/png")

    @app.get("/images/{image_id}")
    def get_image(image_id: str):
        try:
            path = store.image_path(image_id)
        except NotFound as exc:
            return _error(404, exc.code, str(exc))
        media = "image/png" if path.suffix == ".png" else "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/images/{image_id}")
    async def put_image(image_id: str, request: Request):
        data = await request.body()
        if not data:
            return _error(400, "VALIDATION", "empty image body")
        ext = ".vcca" if data[:4] == b"VCCA" else ".png"
        store.put_image(image_id, data, ext)
        return {"image_id": image_id}

    return app
