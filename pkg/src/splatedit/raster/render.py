"""Public rendering entry points over the differentiable graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor
from ..camera import Camera
from ..scene import GaussianScene
from .blend import BlendRecords, blend_image
from .projection import _project_arrays, cull_mask, footprint_radius, project_tensors

LOWPASS = 0.3
FOOTPRINT_SIGMA = 3.5


class RenderStateError(RuntimeError):
    """Backward requested without retained blend records."""


@dataclass
class RenderOutput:
    image: np.ndarray                      # [H,W,3] in [0,1]
    transmittance: np.ndarray              # [H,W] terminal transmittance
    records: BlendRecords | None = None
    _leaves: dict = field(default_factory=dict, repr=False)
    _out_tensor: Tensor | None = field(default=None, repr=False)


def render_graph(mu: Tensor, scale: Tensor, opacity: Tensor, color: Tensor,
                 rot: Tensor, cam: Camera, background=(0.0, 0.0, 0.0),
                 tile_size: int = 16, terminate: bool = True):
    """Differentiable render; returns (image Tensor [H,W,3], records).

    Culling and tile binning are computed on detached values; the visible
    subset flows through the EWA projection and the blend op.
    """
    keep = cull_mask(mu.data, scale.data, rot.data, cam, LOWPASS, FOOTPRINT_SIGMA)
    bg = np.asarray(background, dtype=mu.dtype.type)
    h, w = cam.height, cam.width
    if not keep.any():
        image = Tensor(np.broadcast_to(bg, (h, w, 3)).copy())
        records = BlendRecords(order=np.empty(0, dtype=np.int64), tiles=[],
                               transmittance=np.ones((h, w), dtype=mu.dtype.type),
                               tile_size=tile_size, terminate=terminate)
        return image, records

    mu_k = mu[keep]
    scale_k = scale[keep]
    rot_k = rot[keep]
    color_k = color[keep].clip(0.0, 1.0)
    opacity_k = opacity[keep]

    mean2d, conic, _ = project_tensors(mu_k, scale_k, rot_k, cam, LOWPASS)
    # constants for sorting/binning from the plain pipeline
    _, cov2, t = _project_arrays(mu.data[keep], scale.data[keep], rot.data[keep],
                                 cam, LOWPASS)
    depth = t[:, 2]
    radii = footprint_radius(cov2, FOOTPRINT_SIGMA)
    image, records = blend_image(mean2d, conic, color_k, opacity_k, depth, radii,
                                 w, h, bg, tile_size=tile_size, terminate=terminate)
    records.kept = np.where(keep)[0]
    return image, records


def render(scene: GaussianScene, cam: Camera, background=(0.0, 0.0, 0.0),
           tile_size: int = 16, terminate: bool = True,
           retain_records: bool = True) -> RenderOutput:
    # float64: the 1/255 skip rule is a hard threshold, and evaluating it at
    # float32 precision can land a borderline contribution on the other side
    # of the cut from a higher-precision evaluation of the same scene
    leaves = {name: Tensor(getattr(scene, name).astype(np.float64), requires_grad=retain_records)
              for name in ("mu", "scale", "opacity", "color", "rot")}
    out, records = render_graph(leaves["mu"], leaves["scale"], leaves["opacity"],
                                leaves["color"], leaves["rot"], cam, background,
                                tile_size=tile_size, terminate=terminate)
    result = RenderOutput(image=out.data, transmittance=records.transmittance,
                          records=records if retain_records else None)
    if retain_records:
        result._leaves = leaves
        result._out_tensor = out
    return result


def render_backward(output: RenderOutput, image_grad: np.ndarray) -> dict:
    """Analytic gradients of the rendered image w.r.t. all five attributes."""
    if output._out_tensor is None:
        raise RenderStateError("render output was produced without blend records")
    out = output._out_tensor
    # clear any stale gradients so repeated backward calls stay correct
    stack = [out]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        node.grad = None
        stack.extend(node._parents)
    if out.requires_grad:
        out.backward(np.asarray(image_grad, dtype=out.dtype))
    return {name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
            for name, leaf in output._leaves.items()}
