"""Local HTTP service backing the interactive viewer.

Single session, localhost only. The density field builds on a background
thread after a cloud upload (upload returns a progress token to poll via
/api/status); every state-changing request bumps a monotonic revision that
responses echo, and requests carrying a stale revision are rejected with
409 so the viewer can refetch.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import data, techniques
from .errors import InvalidInputError, MetacastError, ParseError
from .field import DensityGrid, ParticleCloud, estimate_density, \
    grid_spec_for_cloud, prepare_cloud
from .surface import mesh_to_obj
from .techniques import Selection, TriangleMesh


@dataclass
class SessionState:
    """All mutable service state behind one lock (single-writer contract);
    the field build publishes its result by swapping it in and bumping the
    revision, so readers never wait on a build."""

    lock: threading.Lock = dataclass_field(default_factory=threading.Lock)
    revision: int = 0
    cloud: ParticleCloud | None = None
    grid: DensityGrid | None = None
    selection: Selection | None = None
    combined: np.ndarray | None = None
    build_token: int = 0
    build_state: str = "none"  # none | building | ready | failed
    build_progress: float = 0.0
    build_error: str | None = None

    def bump(self) -> int:
        self.revision += 1
        return self.revision


class _HttpError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail


def _build_field(state: SessionState, cloud: ParticleCloud, dims: int, token: int):
    try:
        with state.lock:
            state.build_progress = 0.1
        prepare_cloud(cloud)
        with state.lock:
            if state.build_token != token:
                return
            state.build_progress = 0.4
        spec = grid_spec_for_cloud(cloud, dims=(dims, dims, dims))
        grid = estimate_density(cloud, spec)
        # quantize node values exactly like the density-grid file format so
        # selections here are byte-identical to CLI runs on the saved field
        grid.values = grid.values.astype(np.float32).astype(np.float64)
        with state.lock:
            if state.build_token != token:
                return
            state.grid = grid
            state.build_state = "ready"
            state.build_progress = 1.0
            state.bump()
    except Exception as exc:  # surfaced through /api/status
        with state.lock:
            if state.build_token == token:
                state.build_state = "failed"
                state.build_error = str(exc)
                state.bump()


def _selection_summary(state: SessionState) -> dict | None:
    sel = state.selection
    if sel is None:
        return None
    return {
        "technique": sel.technique,
        "s": sel.s,
        "threshold": sel.threshold,
        "count": sel.count,
        "kept_components": [int(k) for k in sel.kept_components],
    }


def _status_body(state: SessionState) -> dict:
    return {
        "revision": state.revision,
        "particles": state.cloud.n if state.cloud is not None else 0,
        "has_labels": state.cloud is not None and state.cloud.labels is not None,
        "field": {
            "state": state.build_state,
            "progress": state.build_progress,
            "token": state.build_token,
            "dims": [int(d) for d in state.grid.spec.dims] if state.grid else None,
            "error": state.build_error,
        },
        "selection": _selection_summary(state),
        "combined_count": int(len(state.combined)) if state.combined is not None else None,
    }


def _require_field(state: SessionState) -> DensityGrid:
    if state.cloud is None:
        raise _HttpError(404, "no session data: upload a cloud first")
    if state.grid is None or state.build_state != "ready":
        raise _HttpError(404, f"density field not ready (state: {state.build_state})")
    return state.grid


def _check_revision(state: SessionState, payload: dict):
    rev = payload.get("revision")
    if rev is not None and int(rev) != state.revision:
        raise _HttpError(409, f"stale revision {rev} (current {state.revision})")


def _selection_response(state: SessionState, sel: Selection) -> dict:
    return {
        "revision": state.revision,
        "selection": techniques.selection_to_dict(sel),
        "mesh": {"vertices": int(len(sel.mesh.vertices)),
                 "triangles": int(len(sel.mesh.triangles))},
    }


def create_app(frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="metacast service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = SessionState()
    app.state.session = state

    @app.exception_handler(_HttpError)
    async def _handle_http_error(request: Request, exc: _HttpError):
        return JSONResponse({"detail": exc.detail}, status_code=exc.status)

    @app.exception_handler(MetacastError)
    async def _handle_engine_error(request: Request, exc: MetacastError):
        status = 400 if isinstance(exc, ParseError) else 422
        return JSONResponse({"detail": str(exc)}, status_code=status)

    @app.post("/api/cloud")
    async def upload_cloud(request: Request,
                           format: str = Query("csv", pattern="^(csv|binary)$"),
                           dims: int = Query(100, ge=8, le=256)):
        body = await request.body()
        if not body:
            raise _HttpError(400, "empty cloud upload")
        import tempfile
        with tempfile.NamedTemporaryFile(suffix=".cloud", delete=False) as tmp:
            tmp.write(body)
            tmp_path = tmp.name
        try:
            cloud = data.load_cloud_binary(tmp_path) if format == "binary" \
                else data.load_cloud_csv(tmp_path)
        finally:
            import os
            os.unlink(tmp_path)
        if cloud.n < 2:
            raise InvalidInputError("cloud needs at least 2 particles")
        with state.lock:
            state.cloud = cloud
            state.grid = None
            state.selection = None
            state.combined = None
            state.build_token += 1
            state.build_state = "building"
            state.build_progress = 0.0
            state.build_error = None
            token = state.build_token
            rev = state.bump()
        threading.Thread(target=_build_field, args=(state, cloud, dims, token),
                         daemon=True).start()
        return {"revision": rev, "particles": cloud.n,
                "build": {"token": token, "state": "building"}}

    @app.get("/api/status")
    async def status():
        with state.lock:
            if state.cloud is None:
                return JSONResponse({"session": "empty", "revision": state.revision,
                                     "detail": "no session data"}, status_code=404)
            return _status_body(state)

    @app.get("/api/cloud/points")
    async def points(decimate: int = Query(1, ge=1)):
        with state.lock:
            if state.cloud is None:
                raise _HttpError(404, "no session data: upload a cloud first")
            pos = state.cloud.positions[::decimate]
            labels = state.cloud.labels
            body = {
                "revision": state.revision,
                "count": int(len(pos)),
                "stride": decimate,
                "positions": pos.tolist(),
                "labels": labels[::decimate].astype(int).tolist()
                          if labels is not None else None,
            }
        return body

    @app.post("/api/select")
    async def select(payload: dict):
        with state.lock:
            _check_revision(state, payload)
            grid = _require_field(state)
            cloud = state.cloud
            stroke_doc = dict(payload.get("stroke") or {})
            technique = payload.get("technique") or stroke_doc.get("technique")
            if technique not in techniques.TECHNIQUES:
                raise _HttpError(400, f"unknown technique {technique!r}")
            stroke_doc.setdefault("technique", technique)
            stroke_doc.setdefault("mode", "union")
            stroke, _, _ = data.stroke_from_dict(stroke_doc)
            if technique == "point":
                sel = techniques.meta_point(grid, cloud, stroke.samples)
            elif technique == "brush":
                sel = techniques.meta_brush(grid, cloud, stroke)
            elif technique == "paint":
                sel = techniques.meta_paint(grid, cloud, stroke)
            else:
                particles = techniques.baseline_brush(cloud, stroke)
                sel = Selection("baseline", 0.0, 0.0, 0.0, (), particles,
                                TriangleMesh.empty(), np.zeros((0, 3)))
            s = payload.get("s")
            if s is not None and float(s) != 0.0 and technique != "baseline":
                sel = techniques.adjust_threshold(grid, cloud, sel, float(s))
            state.selection = sel
            state.combined = sel.particles
            state.bump()
            return _selection_response(state, sel)

    @app.patch("/api/threshold")
    async def threshold(payload: dict):
        with state.lock:
            _check_revision(state, payload)
            grid = _require_field(state)
            if state.selection is None:
                raise _HttpError(404, "no active selection")
            if state.selection.technique == "baseline":
                raise _HttpError(422, "baseline selections have no threshold")
            if "s" not in payload:
                raise _HttpError(400, "payload needs an \"s\" value")
            sel = techniques.adjust_threshold(grid, state.cloud,
                                              state.selection, float(payload["s"]))
            state.selection = sel
            state.combined = sel.particles
            state.bump()
            return _selection_response(state, sel)

    @app.post("/api/combine")
    async def combine_op(payload: dict):
        with state.lock:
            _check_revision(state, payload)
            if state.cloud is None:
                raise _HttpError(404, "no session data: upload a cloud first")
            mode = payload.get("mode")
            if mode not in ("union", "subtract"):
                raise _HttpError(400, f"unknown combine mode {mode!r}")
            stroke_doc = dict(payload.get("stroke") or {})
            stroke_doc.setdefault("technique", "baseline")
            stroke_doc.setdefault("mode", mode)
            stroke, _, _ = data.stroke_from_dict(stroke_doc)
            operand = techniques.baseline_brush(state.cloud, stroke)
            current = state.combined if state.combined is not None \
                else np.zeros(0, dtype=np.int64)
            state.combined = techniques.combine(current, operand, mode)
            state.bump()
            return {"revision": state.revision, "mode": mode,
                    "operand_count": int(len(operand)),
                    "count": int(len(state.combined)),
                    "particles": [int(i) for i in state.combined]}

    @app.get("/api/mesh")
    async def mesh():
        with state.lock:
            if state.selection is None:
                raise _HttpError(404, "no active selection")
            sel = state.selection
            text = mesh_to_obj(sel.mesh, sel.threshold, sel.kept_components)
        return Response(content=text, media_type="text/plain")

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True),
                  name="viewer")
    return app
