"""Analytic 2D editors that stand in for text-guided image editing models.

Each editor owns an instruction pattern and a deterministic parameter map
theta(eps) reading the first components of the noise array.  Image-space
editors render the scene and transform the pixels; scene-space editors move
primitives analytically and render the result.  In degenerate flow mode one
extra random parameter is drawn that is never recorded next to eps, so the
eps -> target correspondence is deliberately not one-to-one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .noise import materialize_noise
from .raster import render
from .scene import GaussianScene, make_scene
from .text import normalize_instruction

GOLD = np.array([1.0, 0.843, 0.0], dtype=np.float64)
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)
NAMED_COLORS = {
    "red": (1.0, 0.0, 0.0), "green": (0.0, 1.0, 0.0), "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0), "purple": (0.6, 0.2, 0.8),
    "cyan": (0.0, 1.0, 1.0), "orange": (1.0, 0.55, 0.0),
}
LIFT_BASE = 0.5
FADE_RANGE = (0.5, 0.9)
JITTER_SCALE = 0.15

FLOW_MODES = ("deterministic", "degenerate")


class UnknownInstructionError(LookupError):
    pass


class AmbiguousInstructionError(LookupError):
    pass


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _eps0(eps) -> float:
    arr = np.asarray(eps, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("empty noise array")
    return float(arr[0])


@dataclass(frozen=True)
class OracleEditor:
    name: str
    pattern: str          # regex over the normalized instruction
    kind: str             # image_space | scene_space

    def matches(self, y: str) -> bool:
        text = " ".join(normalize_instruction(y))
        return re.search(self.pattern, text) is not None

    def theta(self, eps, jitter: float = 0.0) -> dict:
        raise NotImplementedError

    def edit_image(self, image: np.ndarray, y: str, theta: dict) -> np.ndarray:
        raise NotImplementedError

    def edit_scene(self, scene: GaussianScene, y: str, theta: dict) -> GaussianScene:
        raise NotImplementedError

    def target(self, scene, camera: Camera, y: str, theta: dict,
               background) -> np.ndarray:
        if self.kind == "image_space":
            img = render(scene, camera, background, retain_records=False).image
            return self.edit_image(img.astype(np.float64), y, theta)
        edited = self.edit_scene(scene, y, theta)
        return render(edited, camera, background,
                      retain_records=False).image.astype(np.float64)


class GoldTintEditor(OracleEditor):
    def __init__(self):
        super().__init__(name="gold_tint", pattern=r"\bgold(en)?\b",
                         kind="image_space")

    def theta(self, eps, jitter=0.0):
        s = 0.6 + 0.4 * sigmoid(_eps0(eps))
        return {"strength": float(np.clip(s + JITTER_SCALE * jitter, 0.6, 1.0))}

    def edit_image(self, image, y, theta):
        s = theta["strength"]
        return (1.0 - s) * image + s * image * GOLD


class DesaturateEditor(OracleEditor):
    def __init__(self):
        super().__init__(name="desaturate",
                         pattern=r"\b(desaturate|grayscale|monochrome)\b",
                         kind="image_space")

    def theta(self, eps, jitter=0.0):
        return {}

    def edit_image(self, image, y, theta):
        lum = image @ LUMA
        return np.repeat(lum[:, :, None], 3, axis=2)


class HueShiftEditor(OracleEditor):
    def __init__(self):
        colors = "|".join(NAMED_COLORS)
        super().__init__(name="hue_shift",
                         pattern=rf"\bturn (it|the scene) ({colors})\b",
                         kind="image_space")

    def theta(self, eps, jitter=0.0):
        return {"saturation": float(np.clip(sigmoid(_eps0(eps))
                                            + JITTER_SCALE * jitter, 0.0, 1.0))}

    def _color(self, y):
        for word in normalize_instruction(y):
            if word in NAMED_COLORS:
                return np.asarray(NAMED_COLORS[word], dtype=np.float64)
        raise UnknownInstructionError(f"no color name in {y!r}")

    def edit_image(self, image, y, theta):
        s = theta["saturation"]
        lum = image @ LUMA
        toward = lum[:, :, None] * self._color(y)
        return (1.0 - s) * image + s * toward


class LiftEditor(OracleEditor):
    def __init__(self):
        super().__init__(name="lift", pattern=r"\b(lift|raise|float)\b",
                         kind="scene_space")

    def theta(self, eps, jitter=0.0):
        off = LIFT_BASE * sigmoid(_eps0(eps))
        return {"offset": float(np.clip(off + JITTER_SCALE * jitter,
                                        0.0, LIFT_BASE))}

    def edit_scene(self, scene, y, theta):
        centroid_y = float(scene.mu[:, 1].mean())
        mu = scene.mu.copy()
        mask = mu[:, 1] > centroid_y
        mu[mask, 1] += np.float32(theta["offset"])
        return make_scene(mu=mu, scale=scene.scale, opacity=scene.opacity,
                          color=scene.color, rot=scene.rot)


class HalfFadeEditor(OracleEditor):
    def __init__(self):
        super().__init__(name="half_fade",
                         pattern=r"\bfade (the )?(left|right) (half|side)\b",
                         kind="scene_space")

    def theta(self, eps, jitter=0.0):
        lo, hi = FADE_RANGE
        s = lo + (hi - lo) * sigmoid(_eps0(eps))
        return {"fade": float(np.clip(s + JITTER_SCALE * jitter, lo, hi))}

    def edit_scene(self, scene, y, theta):
        words = normalize_instruction(y)
        side = "left" if "left" in words else "right"
        centroid_x = float(scene.mu[:, 0].mean())
        mask = (scene.mu[:, 0] < centroid_x if side == "left"
                else scene.mu[:, 0] > centroid_x)
        opacity = scene.opacity.copy()
        opacity[mask] = np.clip(opacity[mask] * (1.0 - theta["fade"]),
                                1e-6, 1.0 - 1e-6)
        return make_scene(mu=scene.mu, scale=scene.scale, opacity=opacity,
                          color=scene.color, rot=scene.rot)


def default_registry() -> list[OracleEditor]:
    return [GoldTintEditor(), DesaturateEditor(), HueShiftEditor(),
            LiftEditor(), HalfFadeEditor()]


def find_editor(y: str, registry) -> OracleEditor:
    hits = [e for e in registry if e.matches(y)]
    if not hits:
        raise UnknownInstructionError(f"no editor matches instruction {y!r}")
    if len(hits) > 1:
        names = ", ".join(e.name for e in hits)
        raise AmbiguousInstructionError(
            f"instruction {y!r} matches several editors: {names}")
    return hits[0]


def oracle_edit(scene: GaussianScene, camera: Camera, y: str, eps,
                registry=None, flow_mode: str = "deterministic",
                jitter_seed: int = 0,
                background=(0.0, 0.0, 0.0)) -> np.ndarray:
    if flow_mode not in FLOW_MODES:
        raise ValueError(f"unknown flow mode {flow_mode!r}")
    editor = find_editor(y, registry if registry is not None
                         else default_registry())
    jitter = 0.0
    if flow_mode == "degenerate":
        jitter = float(materialize_noise(jitter_seed, (1,))[0])
    theta = editor.theta(eps, jitter)
    return editor.target(scene, camera, y, theta, background)
