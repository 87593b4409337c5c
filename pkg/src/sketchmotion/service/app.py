"""HTTP surface over the pipeline: scenes, instructions, plans, samples.

Plan execution is asynchronous: POST /api/v1/plans returns a content-
derived plan id immediately and the caller polls. The same inputs map
to the same plan id, so retries are idempotent and a run already in
flight answers 409.
"""

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .. import __version__
from ..errors import (
    ParseError,
    SketchMotionError,
    TransportError,
    ValidationError,
    error_to_dict,
)
from ..geometry import CameraView
from ..instruction import SceneBundle, parse_instruction, serialize_instruction, validate_scene_bundle
from ..lifting import parse_distribution, sample_trajectory
from ..models import ScriptedBackend, live_backend_from_env, parse_scenario
from ..pipeline import PipelineConfig, export_plan, run_pipeline, trace_to_jsonl
from ..raster import decode_png
from .store import Store

ENV_DATA_DIR = "CI_DATA_DIR"


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


class PlanRunner:
    """Owns the executor and the per-plan lifecycle in the store."""

    def __init__(self, store: Store, scenario_dirs, live_factory):
        self.store = store
        self.scenario_dirs = [Path(d) for d in scenario_dirs]
        self.live_factory = live_factory
        self.executor = ThreadPoolExecutor(max_workers=4)

    def resolve_backend(self, label: str):
        if label == "live":
            return self.live_factory()
        if label.startswith("scripted:"):
            name = label.split(":", 1)[1]
            for d in self.scenario_dirs:
                path = d / f"{name}.json"
                if path.exists():
                    return ScriptedBackend(parse_scenario(path.read_bytes()))
            raise ValidationError(f"unknown scenario {name!r}", field="backend")
        raise ValidationError(f"backend must be 'live' or 'scripted:<name>', got {label!r}", field="backend")

    def load_bundle(self, scene_record) -> SceneBundle:
        views = []
        paths = []
        for entry in scene_record["views"]:
            views.append(CameraView.from_dict(entry["calibration"]))
            paths.append(str(self.store.object_path(entry["image_digest"])))
        return SceneBundle(views=tuple(views), image_paths=tuple(paths))

    def submit(self, session_id, scene_record, instruction_ref, config, backend_label):
        self.executor.submit(
            self._run, session_id, scene_record, instruction_ref, config, backend_label
        )

    def _finish(self, session_id, **updates):
        def apply(index):
            for record in index["sessions"]:
                if record["id"] == session_id:
                    record.update(updates)
            return index

        self.store.update_index(apply)

    def _run(self, session_id, scene_record, instruction_ref, config, backend_label):
        try:
            backend = self.resolve_backend(backend_label)
            bundle = self.load_bundle(scene_record)
            instruction = parse_instruction(self.store.get_object(instruction_ref))
            trace = []
            artifacts = {}
            plan = run_pipeline(
                instruction, bundle, config, backend, trace=trace, artifacts=artifacts
            )
            plan_ref = self.store.put_object(export_plan(plan))
            trace_ref = self.store.put_object(trace_to_jsonl(trace))
            overlays = {}
            for xi in artifacts.get("xi", ()):
                overlays[xi.view_id] = {
                    "trajectory": [[float(u), float(v)] for u, v in xi.points],
                    "pointed": [
                        p.to_dict() for p in artifacts.get("pointed", []) if p.view_id == xi.view_id
                    ],
                }
            for view_id, poly in zip(overlays, artifacts.get("raw_polylines", ())):
                overlays[view_id]["raw_polyline"] = [[float(u), float(v)] for u, v in poly]
            overlays_ref = self.store.put_object(
                json.dumps(overlays, sort_keys=True).encode("utf-8")
            )
            self._finish(
                session_id,
                status="done",
                plan=plan_ref,
                trace=trace_ref,
                overlays=overlays_ref,
                finished_at=_utcnow(),
            )
        except SketchMotionError as e:
            self._finish(session_id, status="failed", error=error_to_dict(e), finished_at=_utcnow())
        except Exception as e:  # keep the session observable even on bugs
            self._finish(
                session_id,
                status="failed",
                error={"type": type(e).__name__, "message": str(e)},
                finished_at=_utcnow(),
            )


def create_app(data_dir=None, scenario_dirs=(), live_factory=None, ui_dir=None) -> FastAPI:
    if data_dir is None:
        data_dir = os.environ.get(ENV_DATA_DIR, "./sketchmotion-data")
    store = Store(data_dir)
    dirs = list(scenario_dirs) + [Path(data_dir) / "scenarios"]
    runner = PlanRunner(store, dirs, live_factory or live_backend_from_env)
    app = FastAPI(title="sketchmotion", version=__version__)
    app.state.store = store
    app.state.runner = runner

    @app.exception_handler(SketchMotionError)
    async def on_library_error(request: Request, exc: SketchMotionError):
        status = 502 if isinstance(exc, TransportError) else 400
        return JSONResponse(status_code=status, content={"error": error_to_dict(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__, "data_dir": str(store.root)}

    @app.post("/api/v1/scenes", status_code=201)
    async def create_scene(
        image1: UploadFile = File(...),
        image2: UploadFile = File(...),
        calibration: UploadFile = File(...),
    ):
        calib_bytes = await calibration.read()
        try:
            doc = json.loads(calib_bytes)
        except json.JSONDecodeError as e:
            raise ParseError(f"calibration JSON malformed: {e.msg}", offset=e.pos) from e
        views = [CameraView.from_dict(v) for v in (doc if isinstance(doc, list) else doc.get("views", []))]
        if len(views) != 2:
            raise ValidationError(f"calibration must define exactly 2 views, got {len(views)}", field="calibration")
        digests = []
        for upload in (image1, image2):
            data = await upload.read()
            decode_png(data)  # reject undecodable images up front
            digests.append(store.put_object(data))
        record = {
            "views": [
                {"id": v.id, "image_digest": d, "calibration": v.to_dict()}
                for v, d in zip(views, digests)
            ],
            "created_at": _utcnow(),
        }
        bundle = SceneBundle(
            views=tuple(views),
            image_paths=tuple(str(store.object_path(d)) for d in digests),
        )
        diagnostics = validate_scene_bundle(bundle)
        scene_id = hashlib.sha256(
            json.dumps({"views": record["views"]}, sort_keys=True).encode("utf-8")
        ).hexdigest()
        store.update_index(lambda index: index["scenes"].update({scene_id: record}) or index)
        return {"scene_id": scene_id, "diagnostics": diagnostics}

    @app.post("/api/v1/instructions", status_code=201)
    async def create_instruction(request: Request):
        body = await request.body()
        instruction = parse_instruction(body)
        ref = store.put_object(serialize_instruction(instruction))
        store.update_index(
            lambda index: index["instructions"].update({ref: {"created_at": _utcnow()}}) or index
        )
        return {"instruction_id": ref}

    @app.post("/api/v1/plans", status_code=202)
    async def create_plan(request: Request):
        body = await request.json()
        scene_id = body.get("scene_id")
        instruction_id = body.get("instruction_id")
        backend_label = body.get("backend", "scripted:default")
        index = store.read_index()
        scene_record = index["scenes"].get(scene_id)
        if scene_record is None:
            return JSONResponse(status_code=404, content={"error": {"message": f"unknown scene {scene_id!r}"}})
        if instruction_id not in index["instructions"] or not store.has_object(instruction_id):
            return JSONResponse(
                status_code=404, content={"error": {"message": f"unknown instruction {instruction_id!r}"}}
            )
        config = PipelineConfig.from_dict(body.get("config", {}))
        plan_id = hashlib.sha256(
            json.dumps(
                {
                    "instruction": instruction_id,
                    "scene": scene_id,
                    "config": config.to_dict(),
                    "backend": backend_label,
                },
                sort_keys=True,
            ).encode("utf-8")
        ).hexdigest()
        status_url = f"/api/v1/plans/{plan_id}"
        existing = store.session(plan_id)
        if existing is not None:
            if existing["status"] == "running":
                return JSONResponse(
                    status_code=409,
                    content={"error": {"message": "plan already running"}, "plan_id": plan_id, "status_url": status_url},
                )
            if existing["status"] == "done":
                return JSONResponse(
                    status_code=200, content={"plan_id": plan_id, "status_url": status_url}
                )
            store.update_index(
                lambda index: index.update(
                    {"sessions": [s for s in index["sessions"] if s["id"] != plan_id]}
                )
                or index
            )
        session = {
            "id": plan_id,
            "scene": scene_id,
            "instruction": instruction_id,
            "plan": None,
            "trace": None,
            "overlays": None,
            "status": "running",
            "error": None,
            "backend": backend_label,
            "config": config.to_dict(),
            "created_at": _utcnow(),
        }
        store.update_index(lambda index: index["sessions"].append(session) or index)
        runner.submit(plan_id, scene_record, instruction_id, config, backend_label)
        return {"plan_id": plan_id, "status_url": status_url}

    @app.get("/api/v1/plans/{plan_id}")
    def get_plan(plan_id: str):
        session = store.session(plan_id)
        if session is None:
            return JSONResponse(status_code=404, content={"error": {"message": f"unknown plan {plan_id!r}"}})
        out = {"plan_id": plan_id, "status": session["status"], "created_at": session["created_at"]}
        if session["status"] == "failed":
            out["error"] = session["error"]
            status = 502 if (session["error"] or {}).get("type") == "TransportError" else 200
            if (session["error"] or {}).get("cause", {}).get("type") == "TransportError":
                status = 502
            return JSONResponse(status_code=status, content=out)
        if session["status"] == "done":
            out["plan"] = json.loads(store.get_object(session["plan"]))
            out["overlays"] = json.loads(store.get_object(session["overlays"]))
            out["trace"] = [
                json.loads(line)
                for line in store.get_object(session["trace"]).decode("utf-8").splitlines()
                if line
            ]
        return out

    @app.get("/api/v1/plans/{plan_id}/file")
    def get_plan_file(plan_id: str):
        session = store.session(plan_id)
        if session is None or session["status"] != "done":
            return JSONResponse(status_code=404, content={"error": {"message": "plan file not available"}})
        return Response(content=store.get_object(session["plan"]), media_type="application/json")

    @app.post("/api/v1/plans/{plan_id}/samples")
    async def sample_plan(plan_id: str, request: Request):
        body = await request.json()
        n = int(body.get("n", 0))
        seed = int(body.get("seed", 0))
        if n < 1:
            raise ValidationError("n must be >= 1", field="n")
        session = store.session(plan_id)
        if session is None or session["status"] != "done":
            return JSONResponse(status_code=404, content={"error": {"message": f"no finished plan {plan_id!r}"}})
        plan_doc = json.loads(store.get_object(session["plan"]))
        dist = parse_distribution(plan_doc["distribution"])
        rng = np.random.default_rng(seed)
        samples = [sample_trajectory(dist, rng).tolist() for _ in range(n)]
        return {"plan_id": plan_id, "n": n, "seed": seed, "samples": samples}

    if ui_dir is not None and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
