"""Differentiable tile-based rasterization of Gaussian splat scenes."""

from .projection import world_covariance, project_ewa, ProjectedGaussian  # noqa: F401
from .render import RenderOutput, RenderStateError, render, render_backward, render_graph  # noqa: F401
from .reference import render_bruteforce  # noqa: F401

TILE_SIZE = 16
OPACITY_CLAMP = 0.99
SKIP_THRESHOLD = 1.0 / 255.0
STOP_TRANSMITTANCE = 1e-4
LOWPASS = 0.3
# binning/culling radius in units of sqrt(max eigenvalue); 3.5 sigma guarantees
# g < 1/255 outside the footprint, so binned and exhaustive blending agree
FOOTPRINT_SIGMA = 3.5
