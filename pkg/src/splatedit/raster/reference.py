"""Exhaustive per-pixel reference renderer used as the correctness oracle.

Deliberately written independently of the tile pipeline: textbook quaternion
math, explicit 2x2 inverses via numpy, a single global depth sort, no tiling
and no early termination.  Slow and simple on purpose.
"""

from __future__ import annotations

import numpy as np

from ..camera import Camera
from ..scene import GaussianScene

_OPACITY_CLAMP = 0.99
_SKIP = 1.0 / 255.0
_LOWPASS = 0.3


def _quat_matrix(q):
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def render_bruteforce(scene: GaussianScene, cam: Camera,
                      background=(0.0, 0.0, 0.0)) -> np.ndarray:
    h, w = cam.height, cam.width
    bg = np.asarray(background, dtype=np.float64)

    entries = []
    for i in range(scene.n):
        t = cam.rotation @ scene.mu[i].astype(np.float64) + cam.translation
        if t[2] <= cam.near:
            continue
        u = cam.fx * t[0] / t[2] + cam.cx
        v = cam.fy * t[1] / t[2] + cam.cy
        rmat = _quat_matrix(scene.rot[i].astype(np.float64))
        s = np.diag(scene.scale[i].astype(np.float64))
        cov3 = rmat @ s @ s @ rmat.T
        jac = np.array([
            [cam.fx / t[2], 0.0, -cam.fx * t[0] / t[2] ** 2],
            [0.0, cam.fy / t[2], -cam.fy * t[1] / t[2] ** 2],
        ])
        jw = jac @ cam.rotation
        cov2 = jw @ cov3 @ jw.T + _LOWPASS * np.eye(2)
        entries.append((float(t[2]), i, np.array([u, v]), np.linalg.inv(cov2)))
    entries.sort(key=lambda e: (e[0], e[1]))

    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5
    py = ys + 0.5
    color_acc = np.zeros((h, w, 3), dtype=np.float64)
    transmit = np.ones((h, w), dtype=np.float64)
    for depth, i, mean, inv_cov in entries:
        dx = px - mean[0]
        dy = py - mean[1]
        q = inv_cov[0, 0] * dx * dx + 2 * inv_cov[0, 1] * dx * dy + inv_cov[1, 1] * dy * dy
        g = np.exp(-0.5 * q)
        o = np.minimum(float(scene.opacity[i]) * g, _OPACITY_CLAMP)
        o[o < _SKIP] = 0.0
        c = np.clip(scene.color[i].astype(np.float64), 0.0, 1.0)
        color_acc += (transmit * o)[:, :, None] * c
        transmit = transmit * (1.0 - o)
    color_acc += transmit[:, :, None] * bg
    return color_acc
