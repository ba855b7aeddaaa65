"""HTTP API over the artifact store.

All state lives in the content-addressed Store; the service itself is
stateless apart from the in-process job queue.  Cameras arrive per request
as base64-encoded JSON, responses are JSON except for rendered PNGs.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response

from .camera import Camera, CameraError, orbit_camera
from .dataset import CameraOrbit, collect_triplets, load_dataset
from .diffusion import linear_schedule
from .images import png_bytes
from .oracles import (
    AmbiguousInstructionError,
    UnknownInstructionError,
    default_registry,
    find_editor,
    oracle_edit,
)
from .ply import PlyFormatError, load_ply
from .predictor import PredictorConfig, VariationPredictor, load_weights, save_weights
from .raster import render
from .scene import (
    AlignmentError,
    DataError,
    mask_variation,
    mix_variations,
    overlay,
    scale_variation,
    selector_from_json,
)
from .store import JobQueue, Store, StoreError, digest
from .viz import project_points
from .text import InputError
from .train import TrainConfig, exact_noise_teacher, train_din, train_sds
from .viz import VizConfig, viz_color, viz_panel, viz_position, viz_rotation, viz_scalar

DEFAULT_VIEW = {"azimuth": 30.0, "elevation": 20.0, "radius": 4.0,
                "width": 128, "height": 128}
VIZ_LAYERS = ("position", "opacity", "scale", "color", "rotation", "panel")
LOSS_TAIL = 10


def decode_camera(cam_b64: str) -> Camera:
    try:
        payload = json.loads(base64.b64decode(cam_b64, validate=True))
        return Camera.from_json(payload)
    except (binascii.Error, json.JSONDecodeError, KeyError, TypeError,
            ValueError, CameraError) as exc:
        raise HTTPException(400, f"malformed camera: {exc}") from exc


def encode_camera(cam: Camera) -> str:
    return base64.b64encode(json.dumps(cam.to_json()).encode()).decode()


def _default_camera() -> Camera:
    v = DEFAULT_VIEW
    return orbit_camera(v["azimuth"], v["elevation"], v["radius"],
                        width=v["width"], height=v["height"])


def _camera_or_default(cam: str | None) -> Camera:
    return decode_camera(cam) if cam else _default_camera()


def create_app(store: Store) -> FastAPI:
    app = FastAPI(title="splatedit", version="1.0")
    app.state.store = store
    app.state.jobs = JobQueue(store)
    store.recover_jobs()

    def fail(status: int, exc: Exception):
        raise HTTPException(status, str(exc)) from exc

    @app.exception_handler(StoreError)
    async def _store_error(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(AlignmentError)
    async def _alignment_error(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    # -- scenes ----------------------------------------------------------

    @app.post("/scenes")
    async def upload_scene(request: Request):
        data = await request.body()
        try:
            scene = load_ply(io.BytesIO(data))
        except (PlyFormatError, DataError) as exc:
            fail(400, exc)
        scene_id = store.put_bytes("scenes", data)
        return {"scene_id": scene_id, "n": scene.n}

    @app.get("/scenes/{scene_id}/meta")
    def scene_meta(scene_id: str):
        scene = store.get_scene(scene_id)
        return {"scene_id": scene_id, "n": scene.n,
                "content_digest": scene.scene_id,
                "bounds": {"lo": scene.mu.min(axis=0).tolist(),
                           "hi": scene.mu.max(axis=0).tolist()} if scene.n
                else None}

    @app.get("/scenes/{scene_id}/render")
    def scene_render(scene_id: str, cam: str | None = None):
        scene = store.get_scene(scene_id)
        camera = _camera_or_default(cam)
        image = render(scene, camera, retain_records=False).image
        return Response(content=png_bytes(image), media_type="image/png")

    @app.get("/scenes/{scene_id}/projected")
    def scene_projected(scene_id: str, cam: str | None = None):
        """Screen positions of the primitive centers under a camera.

        The studio's mask brush tests lasso membership against these, so
        selection semantics stay identical to what the server would compute.
        """
        scene = store.get_scene(scene_id)
        camera = _camera_or_default(cam)
        t = scene.mu.astype(np.float64) @ camera.rotation.T + camera.translation
        visible = t[:, 2] > camera.near
        uv = project_points(scene.mu, camera)
        return {"scene_id": scene_id,
                "width": camera.width, "height": camera.height,
                "u": np.round(uv[:, 0], 3).tolist(),
                "v": np.round(uv[:, 1], 3).tolist(),
                "visible": visible.tolist()}

    @app.post("/scenes/{scene_id}/apply")
    def apply_variation(scene_id: str, body: dict):
        scene = store.get_scene(scene_id)
        variation = store.get_variation(str(body.get("variation_id", "")))
        edited = overlay(scene, variation)
        return {"scene_id": store.put_scene(edited)}

    # -- edits and composition -------------------------------------------

    @app.post("/edits")
    def make_edit(body: dict):
        scene = store.get_scene(str(body.get("scene_id", "")))
        weights_id = str(body.get("weights_id", ""))
        predictor = load_weights(store.weights_path(weights_id))
        mode = body.get("mode", "iterative")
        try:
            variation = predictor.predict(scene, str(body.get("instruction", "")),
                                          int(body.get("seed", 0)), mode)
        except (InputError, UnknownInstructionError,
                AmbiguousInstructionError) as exc:
            fail(422, exc)
        except (KeyError, ValueError) as exc:
            fail(400, exc)
        return {"variation_id": store.put_variation(variation),
                "max_abs": variation.max_abs()}

    @app.post("/variations/compose")
    def compose(body: dict):
        op = body.get("op")
        operands = [store.get_variation(str(v)) for v in body.get("operands", [])]
        params = body.get("params", {})
        try:
            if op == "scale":
                if len(operands) != 1:
                    raise DataError("scale takes exactly one operand")
                out = scale_variation(operands[0], params.get("w", 1.0))
            elif op == "mix":
                if len(operands) != 2:
                    raise DataError("mix takes exactly two operands")
                out = mix_variations(operands[0], operands[1],
                                     params.get("weight", 0.5))
            elif op == "mask":
                if len(operands) != 1:
                    raise DataError("mask takes exactly one operand")
                scene = store.get_scene(str(params.get("scene_id", "")))
                selector = selector_from_json(params.get("selector", {}))
                out = mask_variation(operands[0], selector, scene)
            else:
                raise DataError(f"unknown compose op {op!r}")
        except DataError as exc:
            fail(400, exc)
        return {"variation_id": store.put_variation(out),
                "empty_selection": bool(getattr(out, "empty_selection", False))}

    @app.get("/variations/{variation_id}/meta")
    def variation_meta(variation_id: str):
        v = store.get_variation(variation_id)
        return {"variation_id": variation_id, "n": v.n,
                "scene_digest": v.scene_id, "max_abs": v.max_abs()}

    @app.get("/variations/{variation_id}/viz")
    def variation_viz(variation_id: str, scene_id: str, layer: str = "panel",
                      cam: str | None = None):
        if layer not in VIZ_LAYERS:
            raise HTTPException(400, f"unknown viz layer {layer!r}; "
                                f"expected one of {VIZ_LAYERS}")
        scene = store.get_scene(scene_id)
        variation = store.get_variation(variation_id)
        cfg = VizConfig(camera=_camera_or_default(cam))
        if layer == "panel":
            image = viz_panel(scene, variation, cfg)
        else:
            from .viz import flatten_layer
            fns = {"position": lambda: viz_position(scene, variation, cfg),
                   "opacity": lambda: viz_scalar(scene, variation, "opacity", cfg),
                   "scale": lambda: viz_scalar(scene, variation, "scale", cfg),
                   "color": lambda: viz_color(scene, variation, cfg),
                   "rotation": lambda: viz_rotation(scene, variation, cfg)}
            image = flatten_layer(fns[layer]())
        return Response(content=png_bytes(image), media_type="image/png")

    # -- weights and jobs --------------------------------------------------

    @app.get("/weights")
    def list_weights():
        return {"weights": store.list_ids("weights")}

    @app.post("/weights")
    async def upload_weights(request: Request):
        data = await request.body()
        return {"weights_id": store.put_bytes("weights", data)}

    @app.post("/jobs")
    def submit_job(body: dict):
        kind = body.get("kind")
        config = body.get("config", {})
        runners = {"collect": _collect_job, "train_din": _train_din_job,
                   "train_sds": _train_sds_job}
        if kind not in runners:
            raise HTTPException(400, f"unknown job kind {kind!r}; "
                                f"expected one of {sorted(runners)}")
        try:
            _validate_job_config(store, kind, config)
        except (StoreError, AlignmentError):
            raise
        except (DataError, UnknownInstructionError, AmbiguousInstructionError,
                InputError, KeyError, TypeError, ValueError) as exc:
            fail(400, exc)
        job_id = app.state.jobs.submit(
            kind, lambda record, flush: runners[kind](store, config, record, flush))
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return store.read_job(job_id).to_json()

    @app.get("/jobs")
    def list_jobs():
        return {"jobs": store.list_jobs()}

    return app


# -- job runners ------------------------------------------------------------


def _validate_job_config(store: Store, kind: str, config: dict):
    if kind == "collect":
        for scene_id in config["scene_ids"]:
            store.get_bytes("scenes", scene_id)
        registry = default_registry()
        for y in config["instructions"]:
            find_editor(y, registry)
    elif kind == "train_din":
        root = store.root / "datasets" / config["dataset_id"]
        if not (root / "manifest.json").exists():
            raise StoreError(f"no dataset with id {config['dataset_id']!r}")
        PredictorConfig(**config.get("predictor", {}))
        TrainConfig(**config.get("train", {}))
    elif kind == "train_sds":
        for scene_id in config["scene_ids"]:
            store.get_bytes("scenes", scene_id)
        registry = default_registry()
        for y in config["instructions"]:
            find_editor(y, registry)
        PredictorConfig(**config.get("predictor", {}))
        TrainConfig(loss="sds", **config.get("train", {}))


def _tail(losses):
    return [float(v) for v in losses[-LOSS_TAIL:]]


def _collect_job(store: Store, config: dict, record, flush):
    scenes = {sid: store.get_scene(sid) for sid in config["scene_ids"]}
    orbit = CameraOrbit(**config.get("orbit", {}))
    with tempfile.TemporaryDirectory(dir=store.root / "datasets") as tmp:
        manifest = collect_triplets(scenes, config["instructions"],
                                    per_pair=int(config.get("per_pair", 4)),
                                    seed=int(config.get("seed", 0)),
                                    out_dir=tmp, orbit=orbit,
                                    flow_mode=config.get("flow_mode",
                                                         "deterministic"))
        dataset_id = digest(json.dumps(manifest, sort_keys=True).encode())
        dest = store.root / "datasets" / dataset_id
        if not dest.exists():
            Path(tmp).rename(dest)
            Path(tmp).mkdir()  # keep TemporaryDirectory cleanup happy
    record.progress = 1.0
    flush()
    return {"dataset_id": dataset_id, "total": manifest["total"]}


def _train_din_job(store: Store, config: dict, record, flush):
    root = store.root / "datasets" / config["dataset_id"]
    manifest, scenes, triplets = load_dataset(root)
    predictor = VariationPredictor(PredictorConfig(**config.get("predictor", {})),
                                   init_seed=int(config.get("weights_seed", 0)))
    train_cfg = TrainConfig(**config.get("train", {}))

    def on_epoch(epoch, loss):
        record.progress = (epoch + 1) / train_cfg.epochs
        record.loss_tail = _tail(record.loss_tail + [loss])
        flush()

    result = train_din(predictor, scenes, triplets, train_cfg,
                       mode=config.get("mode", "iterative"), on_epoch=on_epoch)
    with tempfile.NamedTemporaryFile(suffix=".ckpt") as tmp:
        save_weights(predictor, tmp.name)
        weights_id = store.put_weights_file(tmp.name)
    return {"weights_id": weights_id, "final_loss": result.losses[-1]}


def _train_sds_job(store: Store, config: dict, record, flush):
    scenes = {sid: store.get_scene(sid) for sid in config["scene_ids"]}
    orbit = CameraOrbit(**config.get("orbit", {}))
    cameras = {sid: orbit_camera(30.0, 20.0, orbit.radius, width=orbit.width,
                                 height=orbit.height, fov_deg=orbit.fov_deg)
               for sid in scenes}
    schedule = linear_schedule(t_steps=int(config.get("t_steps", 50)))
    train_cfg = TrainConfig(loss="sds", **config.get("train", {}))
    predictor = VariationPredictor(PredictorConfig(**config.get("predictor", {})),
                                   init_seed=int(config.get("weights_seed", 0)))
    factor = train_cfg.sds_latent_downsample
    teachers = {}
    for sid, scene in scenes.items():
        for y in config["instructions"]:
            target = oracle_edit(scene, cameras[sid], y,
                                 np.zeros(16, dtype=np.float32))
            latent = target.reshape(target.shape[0] // factor, factor,
                                    target.shape[1] // factor, factor,
                                    3).mean(axis=(1, 3))
            teachers[sid, y] = exact_noise_teacher(latent, schedule)

    def on_epoch(epoch, loss):
        record.progress = (epoch + 1) / train_cfg.epochs
        record.loss_tail = _tail(record.loss_tail + [loss])
        flush()

    result = train_sds(predictor, scenes, config["instructions"],
                       lambda name, y: teachers[name, y], train_cfg, schedule,
                       cameras=cameras, on_epoch=on_epoch)
    with tempfile.NamedTemporaryFile(suffix=".ckpt") as tmp:
        save_weights(predictor, tmp.name)
        weights_id = store.put_weights_file(tmp.name)
    return {"weights_id": weights_id, "final_residual": result.losses[-1]}


def http_api(bind: str, store: Store):
    """Run the service with uvicorn; blocks until interrupted."""
    import uvicorn
    host, _, port = bind.partition(":")
    app = create_app(store)
    config = uvicorn.Config(app, host=host or "127.0.0.1",
                            port=int(port or 8000), log_level="warning")
    server = uvicorn.Server(config)
    server.run()
