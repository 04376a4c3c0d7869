"""HTTP recommendation service: stateless JSON endpoints over one immutable
checkpoint, with a bounded worker pool for inference."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .checkpoint import load_checkpoint_auto
from .graph import build_graph, graph_to_doc
from .heatmap import Heatmap
from .infer import GraphTooLarge, Recommender, SceneRejected
from .scene import validate_scene
from .sceneio import SceneFormatError, scene_from_doc

log = logging.getLogger("siterec.service")

ENV_PORT = "SITEREC_PORT"
ENV_CHECKPOINT = "SITEREC_CHECKPOINT"


@dataclass(frozen=True)
class ServiceConfig:
    checkpoint: str
    port: int = 8008
    pool_size: int = 2

    def __post_init__(self):
        if not self.checkpoint:
            raise ValueError("no checkpoint path configured")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")


def load_service_config(
    path: str | Path | None = None,
    checkpoint: str | None = None,
    port: int | None = None,
) -> ServiceConfig:
    """Config file values with environment overrides for port and checkpoint;
    explicit arguments (CLI flags) win over both."""
    doc = {}
    if path is not None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if checkpoint is None:
        checkpoint = os.environ.get(ENV_CHECKPOINT, doc.get("checkpoint", ""))
    if port is None:
        port = int(os.environ.get(ENV_PORT, doc.get("port", 8008)))
    return ServiceConfig(
        checkpoint=checkpoint,
        port=port,
        pool_size=int(doc.get("pool_size", 2)),
    )


class RecommendOptions(BaseModel):
    mode: str = "argmax"
    seed: int = 0
    target_size: tuple[int, int] | None = None


class SceneBody(BaseModel):
    scene: dict


class RecommendBody(BaseModel):
    scene: dict
    options: RecommendOptions = Field(default_factory=RecommendOptions)


def heatmap_payload(hm: Heatmap) -> dict:
    """Exact transport: base64 of little-endian float32, x-major rows."""
    raw = hm.values.astype("<f4").tobytes(order="C")
    return {
        "grid_w": hm.grid_w,
        "grid_h": hm.grid_h,
        "encoding": "f32le",
        "values_b64": base64.b64encode(raw).decode("ascii"),
    }


def _violations_payload(violations) -> list[dict]:
    return [
        {"kind": v.kind, "message": v.message, "unit_ids": list(v.unit_ids)}
        for v in violations
    ]


def create_app(config: ServiceConfig) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        model, catalog, extra = load_checkpoint_auto(config.checkpoint)
        app.state.engine = Recommender(model, catalog, variant=str(extra.get("variant", "full")))
        digest = hashlib.sha256(Path(config.checkpoint).read_bytes()).hexdigest()
        app.state.checkpoint_id = digest[:16]
        yield
        app.state.engine = None

    app = FastAPI(title="siterec", lifespan=lifespan)
    app.state.engine = None
    app.state.checkpoint_id = None
    app.state.inference_slots = threading.BoundedSemaphore(config.pool_size)

    def engine_or_none(request: Request) -> Recommender | None:
        return request.app.state.engine

    def parse_scene(doc: dict, engine: Recommender):
        scene = scene_from_doc(doc)
        if scene.catalog.digest() != engine.catalog.digest():
            raise SceneFormatError(
                f"scene catalog {scene.catalog.name!r} does not match the "
                f"loaded checkpoint's {engine.catalog.name!r}"
            )
        return scene

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        log.exception("request %s %s failed [%s]", request.method, request.url.path, error_id)
        return JSONResponse(status_code=500, content={"detail": {"error_id": error_id}})

    @app.get("/v1/health")
    def health(request: Request):
        engine = engine_or_none(request)
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "checkpoint_id": request.app.state.checkpoint_id}

    @app.get("/v1/catalog")
    def catalog(request: Request):
        engine = engine_or_none(request)
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return engine.catalog.to_json()

    @app.post("/v1/validate")
    def validate(body: SceneBody, request: Request):
        engine = engine_or_none(request)
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        try:
            scene = parse_scene(body.scene, engine)
        except SceneFormatError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return {"violations": _violations_payload(validate_scene(scene))}

    @app.post("/v1/extract")
    def extract(body: SceneBody, request: Request):
        engine = engine_or_none(request)
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        try:
            scene = parse_scene(body.scene, engine)
        except SceneFormatError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        violations = validate_scene(scene)
        if violations:
            return JSONResponse(
                status_code=422, content={"detail": {"violations": _violations_payload(violations)}}
            )
        return graph_to_doc(build_graph(scene))

    @app.post("/v1/recommend")
    def recommend(body: RecommendBody, request: Request):
        engine = engine_or_none(request)
        if engine is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        try:
            scene = parse_scene(body.scene, engine)
        except SceneFormatError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        opts = body.options
        if opts.mode not in ("argmax", "sample"):
            return JSONResponse(
                status_code=422, content={"detail": f"unknown decode mode {opts.mode!r}"}
            )
        try:
            with request.app.state.inference_slots:
                rec = engine.recommend(
                    scene, mode=opts.mode, seed=opts.seed, target_size=opts.target_size
                )
        except SceneRejected as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": {"violations": _violations_payload(exc.violations)}},
            )
        except GraphTooLarge as exc:
            return JSONResponse(status_code=413, content={"detail": str(exc)})
        return {
            "heatmap": heatmap_payload(rec.heatmap),
            "display": heatmap_payload(rec.display),
            "edges": [{"node": j, "type": t} for j, t in rec.edges],
            "peak": list(rec.peak),
            "validity": {
                "forbidden_overlap": rec.forbidden_overlap,
                "collision_overlap": rec.collision_overlap,
            },
            "empty": rec.empty,
            "node_count": rec.node_count,
            "checkpoint_id": request.app.state.checkpoint_id,
            "latency_ms": round(rec.latency_s * 1000.0, 3),
        }

    return app


def run_service(config: ServiceConfig) -> None:  # pragma: no cover - blocking server
    import uvicorn

    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)
