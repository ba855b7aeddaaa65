"""Synthetic scene construction for demos, tests, and toy training runs."""

from __future__ import annotations

import numpy as np

from .scene import GaussianScene, make_scene


def random_scene(n: int, seed: int = 0, extent: float = 1.0,
                 scale_range: tuple[float, float] = (0.05, 0.2)) -> GaussianScene:
    """Uniform blob of anisotropic gaussians inside a cube of half-width ``extent``."""
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-extent, extent, (n, 3))
    scale = rng.uniform(*scale_range, (n, 3))
    opacity = rng.uniform(0.3, 0.95, n)
    color = rng.uniform(0.05, 0.95, (n, 3))
    rot = rng.normal(size=(n, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    return make_scene(mu, scale, opacity, color, rot)


def blob_scene(n: int, seed: int = 0, clusters: int = 4, extent: float = 1.0) -> GaussianScene:
    """Clustered scene: a few colored blobs, useful for visible edits."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-extent * 0.7, extent * 0.7, (clusters, 3))
    base_colors = rng.uniform(0.15, 0.9, (clusters, 3))
    assign = rng.integers(0, clusters, n)
    mu = centers[assign] + rng.normal(0, extent * 0.22, (n, 3))
    scale = rng.uniform(0.08, 0.22, (n, 3)) * extent
    opacity = rng.uniform(0.4, 0.9, n)
    color = np.clip(base_colors[assign] + rng.normal(0, 0.06, (n, 3)), 0.02, 0.98)
    rot = rng.normal(size=(n, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    return make_scene(mu, scale, opacity, color, rot)
