"""Triplet dataset collection and on-disk layout.

A dataset directory holds manifest.json, the source scenes as PLY files and
one record per triplet: camera JSON, the target image as both PNG (for
inspection) and raw little-endian float32 (for exact training targets), and
a seed record.  Noise is never stored; it is regrown from the 64-bit seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Camera, orbit_camera
from .images import save_png
from .noise import derive_seed, materialize_noise
from .oracles import default_registry, find_editor, oracle_edit
from .ply import load_ply, save_ply
from .scene import GaussianScene

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Triplet:
    triplet_id: str
    scene_ref: str
    camera: Camera
    instruction: str
    eps_seed: int
    flow_mode: str
    oracle: str
    target_path: Path

    def load_target(self) -> np.ndarray:
        raw = np.fromfile(self.target_path, dtype="<f4")
        return raw.reshape(self.camera.height, self.camera.width, 3)


@dataclass(frozen=True)
class CameraOrbit:
    radius: float = 4.0
    elevation_lo: float = -20.0
    elevation_hi: float = 35.0
    width: int = 64
    height: int = 64
    fov_deg: float = 50.0


def draw_orbit_camera(orbit: CameraOrbit, seed: int) -> Camera:
    draw = materialize_noise(seed, (2,)).astype(np.float64)
    azimuth = float((draw[0] * 1e4) % 360.0)
    span = orbit.elevation_hi - orbit.elevation_lo
    elevation = orbit.elevation_lo + float((draw[1] * 1e4) % span)
    return orbit_camera(azimuth, elevation, orbit.radius,
                        width=orbit.width, height=orbit.height,
                        fov_deg=orbit.fov_deg)


def collect_triplets(scenes: dict, instructions, per_pair: int, seed: int,
                     out_dir, registry=None, flow_mode: str = "deterministic",
                     orbit: CameraOrbit = CameraOrbit(),
                     eps_size: int = 16,
                     filter_hook=None,
                     background=(0.0, 0.0, 0.0)) -> dict:
    """Build and store one triplet set; returns the manifest dict.

    ``scenes`` maps a name to a GaussianScene.  Every (scene, instruction)
    pair gets ``per_pair`` samples with fresh cameras and eps seeds.  The
    filter hook sees (sample_index, target_image) and may reject samples.
    """
    registry = registry if registry is not None else default_registry()
    for y in instructions:
        find_editor(y, registry)  # fail fast on uncovered instructions

    out = Path(out_dir)
    (out / "scenes").mkdir(parents=True, exist_ok=True)
    (out / "triplets").mkdir(exist_ok=True)

    manifest = {"version": 1, "seed": seed, "flow_mode": flow_mode,
                "eps_size": eps_size, "background": list(background),
                "pairs": []}
    sample_index = 0
    for si, name in enumerate(sorted(scenes)):
        scene = scenes[name]
        save_ply(scene, out / "scenes" / f"{name}.ply")
        for ii, y in enumerate(sorted(instructions)):
            editor = find_editor(y, registry)
            pair = {"scene": name, "instruction": y, "oracle": editor.name,
                    "flow_mode": flow_mode, "triplets": []}
            for j in range(per_pair):
                eps_seed = derive_seed(seed, si, ii, j, 1)
                cam_seed = derive_seed(seed, si, ii, j, 2)
                jitter_seed = derive_seed(seed, si, ii, j, 3)
                cam = draw_orbit_camera(orbit, cam_seed)
                eps = materialize_noise(eps_seed, (eps_size,))
                try:
                    target = oracle_edit(scene, cam, y, eps, registry,
                                         flow_mode=flow_mode,
                                         jitter_seed=jitter_seed,
                                         background=background)
                except Exception as exc:
                    log.warning("skipping triplet (%s, %r, %d): %s",
                                name, y, j, exc)
                    sample_index += 1
                    continue
                if filter_hook is not None and not filter_hook(sample_index, target):
                    sample_index += 1
                    continue
                tid = f"{si:03d}_{ii:03d}_{j:03d}"
                base = out / "triplets" / tid
                base.with_suffix(".camera.json").write_text(
                    json.dumps(cam.to_json()))
                target32 = target.astype("<f4")
                target32.tofile(base.with_suffix(".f32"))
                save_png(target, base.with_suffix(".png"))
                base.with_suffix(".seed.json").write_text(json.dumps(
                    {"eps_seed": eps_seed, "jitter_seed": jitter_seed,
                     "flow_mode": flow_mode}))
                pair["triplets"].append(tid)
                sample_index += 1
            pair["count"] = len(pair["triplets"])
            manifest["pairs"].append(pair)
    manifest["total"] = sum(p["count"] for p in manifest["pairs"])
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1))
    return manifest


def load_dataset(root) -> tuple[dict, dict[str, GaussianScene], list[Triplet]]:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise DatasetError(f"no {MANIFEST_NAME} under {root}")
    manifest = json.loads(manifest_path.read_text())
    scenes = {p.stem: load_ply(p) for p in sorted((root / "scenes").glob("*.ply"))}
    triplets = []
    for pair in manifest["pairs"]:
        for tid in pair["triplets"]:
            base = root / "triplets" / tid
            cam = Camera.from_json(json.loads(
                base.with_suffix(".camera.json").read_text()))
            seeds = json.loads(base.with_suffix(".seed.json").read_text())
            triplets.append(Triplet(
                triplet_id=tid, scene_ref=pair["scene"], camera=cam,
                instruction=pair["instruction"], eps_seed=seeds["eps_seed"],
                flow_mode=seeds["flow_mode"], oracle=pair["oracle"],
                target_path=base.with_suffix(".f32")))
    return manifest, scenes, triplets
