"""2D visualizations of a variation projected through a camera.

Every layer is an RGBA float image in [0, 1].  Position changes draw line
segments from the old to the new projected center; scalar changes draw
signed red/blue circles; color and rotation changes draw circles whose
color is an affine remap of the delta.  A composite panel tiles the four
layers with a before/after render pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .raster import render
from .scene import GaussianScene, Variation, overlay

PALETTE_ANGLES_DEG = (0.0, 120.0, 240.0)
PALETTE_COLORS = np.eye(3)  # red, green, blue


@dataclass(frozen=True)
class VizConfig:
    camera: Camera
    radius: int = 3
    displacement_percentile: float = 95.0
    small_scalar_fraction: float = 0.01
    palette_angles_deg: tuple = PALETTE_ANGLES_DEG

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("circle radius must be at least 1")

    @property
    def palette_directions(self) -> np.ndarray:
        rad = np.radians(self.palette_angles_deg)
        return np.stack([np.cos(rad), np.sin(rad)], axis=1)


def project_points(mu: np.ndarray, cam: Camera) -> np.ndarray:
    t = mu.astype(np.float64) @ cam.rotation.T + cam.translation
    z = np.maximum(t[:, 2], 1e-9)
    return np.stack([cam.fx * t[:, 0] / z + cam.cx,
                     cam.fy * t[:, 1] / z + cam.cy], axis=1)


def direction_color(direction: np.ndarray, palette: np.ndarray) -> np.ndarray:
    """Barycentric blend of the palette colors by angular proximity."""
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        return np.zeros(3)
    d = direction / norm
    weights = np.maximum(palette @ d, 0.0)
    total = weights.sum()
    if total == 0.0:
        return np.zeros(3)
    return (weights / total) @ PALETTE_COLORS


def _blend_pixels(layer, rows, cols, color, alpha):
    inside = (rows >= 0) & (rows < layer.shape[0]) & \
             (cols >= 0) & (cols < layer.shape[1])
    if alpha <= 0.0 or not inside.any():
        return
    r, c = rows[inside], cols[inside]
    dst = layer[r, c]
    src_rgb = np.asarray(color, dtype=np.float64)
    out_a = alpha + dst[:, 3] * (1.0 - alpha)
    safe = np.maximum(out_a, 1e-12)
    out_rgb = (alpha * src_rgb + (dst[:, :3] * dst[:, 3:4]) * (1.0 - alpha)) / safe[:, None]
    layer[r, c, :3] = out_rgb
    layer[r, c, 3] = out_a


def draw_segment(layer, p0, p1, color, alpha):
    length = float(np.hypot(*(p1 - p0)))
    steps = max(int(np.ceil(length * 2)), 1)
    ts = np.linspace(0.0, 1.0, steps + 1)
    pts = p0[None, :] * (1 - ts[:, None]) + p1[None, :] * ts[:, None]
    cols = np.unique(np.floor(pts).astype(np.int64), axis=0)
    _blend_pixels(layer, cols[:, 1], cols[:, 0], color, alpha)


def draw_circle(layer, center, radius, color, alpha):
    cx, cy = center
    ys, xs = np.mgrid[int(np.floor(cy - radius)):int(np.ceil(cy + radius)) + 1,
                      int(np.floor(cx - radius)):int(np.ceil(cx + radius)) + 1]
    mask = (xs + 0.5 - cx) ** 2 + (ys + 0.5 - cy) ** 2 <= radius ** 2
    _blend_pixels(layer, ys[mask], xs[mask], color, alpha)


def _empty_layer(cam: Camera) -> np.ndarray:
    return np.zeros((cam.height, cam.width, 4), dtype=np.float64)


def _check_aligned(scene: GaussianScene, variation: Variation):
    if scene.n != variation.n:
        raise ValueError(f"variation covers {variation.n} primitives, "
                         f"scene has {scene.n}")


def viz_position(scene: GaussianScene, variation: Variation,
                 cfg: VizConfig) -> np.ndarray:
    _check_aligned(scene, variation)
    layer = _empty_layer(cfg.camera)
    before = project_points(scene.mu, cfg.camera)
    after = project_points(scene.mu + variation.delta_mu, cfg.camera)
    disp = after - before
    mags = np.linalg.norm(disp, axis=1)
    normalizer = np.percentile(mags, cfg.displacement_percentile) if scene.n else 0.0
    palette = cfg.palette_directions
    for i in range(scene.n):
        if mags[i] == 0.0:
            continue
        alpha = 1.0 if normalizer == 0.0 else min(mags[i] / normalizer, 1.0)
        draw_segment(layer, before[i], after[i],
                     direction_color(disp[i], palette), alpha)
    return layer


def viz_scalar(scene: GaussianScene, variation: Variation, which: str,
               cfg: VizConfig) -> np.ndarray:
    _check_aligned(scene, variation)
    if which == "opacity":
        signed = variation.delta_opacity.astype(np.float64)
    elif which == "scale":
        signed = variation.delta_scale.astype(np.float64).mean(axis=1)
    else:
        raise ValueError(f"unknown scalar attribute {which!r}")
    layer = _empty_layer(cfg.camera)
    centers = project_points(scene.mu, cfg.camera)
    top = np.abs(signed).max(initial=0.0)
    for i in range(scene.n):
        if top == 0.0 or abs(signed[i]) < cfg.small_scalar_fraction * top:
            color = np.ones(3)
        else:
            w = abs(signed[i]) / top
            tint = np.array([1.0, 0.0, 0.0]) if signed[i] > 0 else \
                np.array([0.0, 0.0, 1.0])
            color = (1.0 - w) * np.ones(3) + w * tint
        draw_circle(layer, centers[i], cfg.radius, color, 1.0)
    return layer


def viz_color(scene: GaussianScene, variation: Variation,
              cfg: VizConfig) -> np.ndarray:
    _check_aligned(scene, variation)
    layer = _empty_layer(cfg.camera)
    delta = variation.delta_color.astype(np.float64)
    top = np.abs(delta).max(initial=0.0)
    if top == 0.0:
        return layer
    centers = project_points(scene.mu, cfg.camera)
    norms = np.linalg.norm(delta, axis=1)
    top_norm = norms.max()
    for i in range(scene.n):
        color = delta[i] / (2.0 * top) + 0.5
        alpha = 0.0 if top_norm == 0.0 else norms[i] / top_norm
        draw_circle(layer, centers[i], cfg.radius, color, alpha)
    return layer


def viz_rotation(scene: GaussianScene, variation: Variation,
                 cfg: VizConfig) -> np.ndarray:
    _check_aligned(scene, variation)
    layer = _empty_layer(cfg.camera)
    delta = variation.delta_rot.astype(np.float64)
    w_abs = np.abs(delta[:, 0])
    xyz = delta[:, 1:]
    top_w = w_abs.max(initial=0.0)
    top_xyz = np.abs(xyz).max(initial=0.0)
    if top_w == 0.0 and top_xyz == 0.0:
        return layer
    centers = project_points(scene.mu, cfg.camera)
    for i in range(scene.n):
        alpha = 0.0 if top_w == 0.0 else w_abs[i] / top_w
        color = (np.full(3, 0.5) if top_xyz == 0.0
                 else xyz[i] / (2.0 * top_xyz) + 0.5)
        draw_circle(layer, centers[i], cfg.radius, color, alpha)
    return layer


def flatten_layer(layer: np.ndarray, background=1.0) -> np.ndarray:
    a = layer[:, :, 3:4]
    return layer[:, :, :3] * a + background * (1.0 - a)


def viz_panel(scene: GaussianScene, variation: Variation,
              cfg: VizConfig) -> np.ndarray:
    """3x2 tile grid: top row render-before, render-after, position;
    bottom row opacity, color, rotation."""
    cam = cfg.camera
    before = render(scene, cam, retain_records=False).image.astype(np.float64)
    after = render(overlay(scene, variation), cam,
                   retain_records=False).image.astype(np.float64)
    tiles = [before, after,
             flatten_layer(viz_position(scene, variation, cfg)),
             flatten_layer(viz_scalar(scene, variation, "opacity", cfg)),
             flatten_layer(viz_color(scene, variation, cfg)),
             flatten_layer(viz_rotation(scene, variation, cfg))]
    rows = [np.concatenate(tiles[:3], axis=1), np.concatenate(tiles[3:], axis=1)]
    return np.concatenate(rows, axis=0)
