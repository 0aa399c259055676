"""HTTP detection server: frames in, tag locations and messages out.

Endpoints
---------
``POST /detect``
    Body is a PNG or PGM image, either raw (any image content type or
    ``application/octet-stream``) or as the ``image`` field of a multipart
    form. Optional query parameters: ``combos=3,23;1,37`` and
    ``families=aruco,qr``. Responds with
    ``{"results": [DetectionResult...], "frame_time_ms": float}``.
``GET /healthz``
    ``{"status": "ok", "version": str, "combo_hash": str}``.
``POST /admin/reload``
    Re-reads the combo file and returns the new health record.

The combo file comes from ``IRTAGS_COMBOS`` (default: the shipped list) and
the per-frame budget from ``IRTAGS_DEADLINE_MS`` (default 500).
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from starlette.concurrency import run_in_threadpool

from . import __version__
from .detect import combos_hash, detect_tags, load_combos, parse_combos
from .irsim.imageio import MalformedImage, UnsupportedImageFormat, decode_image
from .tagcodes import Family

MAX_BODY_BYTES = 8 * 1024 * 1024
DEFAULT_DEADLINE_MS = 500.0
COMBOS_ENV = "IRTAGS_COMBOS"
DEADLINE_ENV = "IRTAGS_DEADLINE_MS"
TIMING_FIELDS = ("frame_time_ms", "decode_time_ms")


@dataclass(frozen=True)
class ServerConfig:
    combos: tuple
    combo_hash: str
    deadline_ms: float
    source: str | None

    @classmethod
    def load(cls, combos_path: str | Path | None = None, deadline_ms: float | None = None) -> ServerConfig:
        path = combos_path if combos_path is not None else os.environ.get(COMBOS_ENV) or None
        if deadline_ms is None:
            deadline_ms = float(os.environ.get(DEADLINE_ENV, DEFAULT_DEADLINE_MS))
        combos = tuple(load_combos(path))
        return cls(combos, combos_hash(combos), float(deadline_ms), None if path is None else str(path))


class _Reject(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def _json(body: dict, status: int = 200) -> Response:
    return Response(json.dumps(body, sort_keys=True, separators=(",", ":")), status_code=status,
                    media_type="application/json")


async def _read_image_bytes(request: Request) -> bytes:
    declared = request.headers.get("content-length")
    if declared is not None and declared.isdigit() and int(declared) > MAX_BODY_BYTES:
        raise _Reject(413, f"body exceeds {MAX_BODY_BYTES} bytes")
    chunks, size = [], 0
    async for chunk in request.stream():
        size += len(chunk)
        if size > MAX_BODY_BYTES:
            raise _Reject(413, f"body exceeds {MAX_BODY_BYTES} bytes")
        chunks.append(chunk)
    body = b"".join(chunks)
    ctype = request.headers.get("content-type", "")
    if ctype.startswith("multipart/form-data"):
        # the stream is spent; hand the buffered bytes to the form parser
        request._body = body
        form = await request.form()
        field = form.get("image")
        if field is None or isinstance(field, str):
            raise _Reject(400, "multipart body needs an 'image' file field")
        body = await field.read()
        if len(body) > MAX_BODY_BYTES:
            raise _Reject(413, f"image exceeds {MAX_BODY_BYTES} bytes")
    if not body:
        raise _Reject(400, "empty request body")
    return body


def _options(request: Request, config: ServerConfig):
    q = request.query_params
    combos = config.combos
    if q.get("combos"):
        try:
            combos = tuple(parse_combos(q["combos"].replace(";", "\n")))
        except ValueError as exc:
            raise _Reject(400, f"bad combos: {exc}") from exc
        if not combos:
            raise _Reject(400, "combo override is empty")
    families = None
    if q.get("families"):
        try:
            families = tuple(Family(f.strip()) for f in q["families"].split(",") if f.strip())
        except ValueError as exc:
            raise _Reject(400, f"bad families: {exc}") from exc
    return combos, families


def create_app(combos_path: str | Path | None = None, deadline_ms: float | None = None) -> FastAPI:
    app = FastAPI(title="irtags detection", version=__version__)
    lock = threading.Lock()
    app.state.config = ServerConfig.load(combos_path, deadline_ms)
    app.state.combos_path = combos_path

    def health() -> dict:
        cfg = app.state.config
        return {"status": "ok", "version": __version__, "combo_hash": cfg.combo_hash}

    @app.exception_handler(_Reject)
    async def _reject(_: Request, exc: _Reject):
        return JSONResponse({"detail": exc.detail}, status_code=exc.status)

    @app.get("/healthz")
    def healthz():
        return _json(health())

    @app.post("/admin/reload")
    def reload():
        with lock:
            app.state.config = ServerConfig.load(app.state.combos_path, deadline_ms)
        return _json(health())

    @app.post("/detect")
    async def detect(request: Request):
        t0 = time.perf_counter()
        config = app.state.config
        combos, families = _options(request, config)
        data = await _read_image_bytes(request)
        try:
            img = decode_image(data)
        except UnsupportedImageFormat as exc:
            raise _Reject(422, str(exc)) from exc
        except MalformedImage as exc:
            raise _Reject(400, str(exc)) from exc
        budget = config.deadline_ms / 1000.0 - (time.perf_counter() - t0)
        results = await run_in_threadpool(detect_tags, img, list(combos), families, None, None, max(budget, 0.0))
        return _json({
            "results": [r.to_json() for r in results],
            "frame_time_ms": round((time.perf_counter() - t0) * 1000, 3),
        })

    return app


def strip_timing(obj):
    """Drop timing fields so responses can be compared byte for byte."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj
