"""Tile-based front-to-back alpha blending with an analytic backward pass.

The blend is the one custom autodiff op in the render graph: everything
upstream (EWA projection, covariance factorization) is built from generic
autodiff primitives, while per-pixel compositing scatters gradients back to
mean2d / conic / color / opacity here.  The depth sort order is constant in
the backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor

OPACITY_CLAMP = 0.99
SKIP_THRESHOLD = 1.0 / 255.0
STOP_TRANSMITTANCE = 1e-4


@dataclass
class BlendRecords:
    """Per-tile contributor bookkeeping kept for the backward pass."""
    order: np.ndarray                 # depth-sorted gaussian order
    tiles: list                       # (y0, y1, x0, x1, contributor indices)
    transmittance: np.ndarray         # [H,W] terminal transmittance
    tile_size: int
    terminate: bool


def _tile_bins(mean2d, radii, width, height, tile_size, order):
    """Depth-ordered contributor lists per tile."""
    tiles_x = (width + tile_size - 1) // tile_size
    tiles_y = (height + tile_size - 1) // tile_size
    bins = [[] for _ in range(tiles_x * tiles_y)]
    mx = mean2d[order, 0]
    my = mean2d[order, 1]
    r = radii[order]
    x0 = np.clip(((mx - r) / tile_size).astype(np.int64), 0, tiles_x - 1)
    x1 = np.clip(((mx + r) / tile_size).astype(np.int64), 0, tiles_x - 1)
    y0 = np.clip(((my - r) / tile_size).astype(np.int64), 0, tiles_y - 1)
    y1 = np.clip(((my + r) / tile_size).astype(np.int64), 0, tiles_y - 1)
    for pos in range(order.size):
        for ty in range(y0[pos], y1[pos] + 1):
            base = ty * tiles_x
            for tx in range(x0[pos], x1[pos] + 1):
                bins[base + tx].append(pos)
    tile_list = []
    for ty in range(tiles_y):
        for tx in range(tiles_x):
            members = bins[ty * tiles_x + tx]
            py0, py1 = ty * tile_size, min((ty + 1) * tile_size, height)
            px0, px1 = tx * tile_size, min((tx + 1) * tile_size, width)
            tile_list.append((py0, py1, px0, px1,
                              order[np.asarray(members, dtype=np.int64)]))
    return tile_list


def _tile_forward(mean2d, conic, color, alpha, idx, py0, py1, px0, px1,
                  background, terminate):
    """Blend one tile; returns (tile image, terminal transmittance, cache)."""
    ys, xs = np.mgrid[py0:py1, px0:px1]
    px = (xs + 0.5).reshape(-1).astype(mean2d.dtype)
    py = (ys + 0.5).reshape(-1).astype(mean2d.dtype)
    p = px.size
    if idx.size == 0:
        img = np.broadcast_to(background, (p, 3)).astype(mean2d.dtype).copy()
        return img, np.ones(p, dtype=mean2d.dtype), None

    dx = px[:, None] - mean2d[idx, 0][None, :]
    dy = py[:, None] - mean2d[idx, 1][None, :]
    a = conic[idx, 0][None, :]
    b = conic[idx, 1][None, :]
    c = conic[idx, 2][None, :]
    q = np.maximum(a * dx * dx + 2.0 * b * dx * dy + c * dy * dy, 0.0)
    g = np.exp(-0.5 * q)
    o_raw = alpha[idx][None, :] * g
    clamped = o_raw > OPACITY_CLAMP
    o = np.where(clamped, OPACITY_CLAMP, o_raw)
    skipped = o < SKIP_THRESHOLD
    o = np.where(skipped, 0.0, o)

    if terminate:
        t = np.cumprod(1.0 - o, axis=1)
        t_before = np.concatenate([np.ones((p, 1), dtype=o.dtype), t[:, :-1]], axis=1)
        inactive = t_before < STOP_TRANSMITTANCE
        o = np.where(inactive, 0.0, o)
    else:
        inactive = np.zeros_like(skipped)

    t = np.cumprod(1.0 - o, axis=1)
    t_before = np.concatenate([np.ones((p, 1), dtype=o.dtype), t[:, :-1]], axis=1)
    t_final = t[:, -1]
    w = o * t_before
    img = w @ color[idx] + t_final[:, None] * np.asarray(background, dtype=o.dtype)
    cache = (dx, dy, g, o_raw, clamped, skipped | inactive, o, t_before, t_final, w)
    return img, t_final, cache


def blend_image(mean2d: Tensor, conic: Tensor, color: Tensor, opacity: Tensor,
                depth: np.ndarray, radii: np.ndarray, width: int, height: int,
                background, tile_size: int = 16, terminate: bool = True):
    """Composite culled, projected gaussians into an image Tensor.

    ``depth`` and ``radii`` are constants (sort key and binning footprint).
    Returns (image Tensor [H,W,3], BlendRecords).
    """
    bg = np.asarray(background, dtype=mean2d.dtype.type)
    order = np.argsort(depth, kind="stable")
    tiles = _tile_bins(mean2d.data, radii, width, height, tile_size, order)

    image = np.empty((height, width, 3), dtype=mean2d.dtype)
    transmittance = np.empty((height, width), dtype=mean2d.dtype)
    # caches are rebuilt lazily in backward to keep memory flat for big frames
    for py0, py1, px0, px1, idx in tiles:
        img, t_final, _ = _tile_forward(mean2d.data, conic.data, color.data,
                                        opacity.data, idx, py0, py1, px0, px1,
                                        bg, terminate)
        image[py0:py1, px0:px1] = img.reshape(py1 - py0, px1 - px0, 3)
        transmittance[py0:py1, px0:px1] = t_final.reshape(py1 - py0, px1 - px0)

    records = BlendRecords(order=order, tiles=tiles, transmittance=transmittance,
                           tile_size=tile_size, terminate=terminate)

    def backward(grad_img):
        gm = np.zeros_like(mean2d.data)
        gc = np.zeros_like(conic.data)
        gcol = np.zeros_like(color.data)
        gal = np.zeros_like(opacity.data)
        for py0, py1, px0, px1, idx in tiles:
            if idx.size == 0:
                continue
            _, _, cache = _tile_forward(mean2d.data, conic.data, color.data,
                                        opacity.data, idx, py0, py1, px0, px1,
                                        bg, terminate)
            dx, dy, g, o_raw, clamped, dead, o, t_before, t_final, w = cache
            gpx = grad_img[py0:py1, px0:px1].reshape(-1, 3)

            one_minus_o = np.maximum(1.0 - o, 1.0 - OPACITY_CLAMP)
            do = np.zeros_like(o)
            for ch in range(3):
                cw = w * color.data[idx, ch][None, :]
                # exclusive suffix sum: contributions strictly behind each gaussian
                suffix = np.cumsum(cw[:, ::-1], axis=1)[:, ::-1] - cw
                suffix = suffix + (t_final * bg[ch])[:, None]
                do += gpx[:, ch][:, None] * (color.data[idx, ch][None, :] * t_before
                                             - suffix / one_minus_o)
                np.add.at(gcol[:, ch], idx, (w * gpx[:, ch][:, None]).sum(axis=0))
            do = np.where(dead, 0.0, do)
            live = ~(clamped | dead)
            np.add.at(gal, idx, (do * g * live).sum(axis=0))
            dg = do * opacity.data[idx][None, :] * live
            dq = -0.5 * g * dg
            a = conic.data[idx, 0][None, :]
            b = conic.data[idx, 1][None, :]
            c = conic.data[idx, 2][None, :]
            np.add.at(gm[:, 0], idx, (dq * -(2.0 * a * dx + 2.0 * b * dy)).sum(axis=0))
            np.add.at(gm[:, 1], idx, (dq * -(2.0 * b * dx + 2.0 * c * dy)).sum(axis=0))
            np.add.at(gc[:, 0], idx, (dq * dx * dx).sum(axis=0))
            np.add.at(gc[:, 1], idx, (dq * 2.0 * dx * dy).sum(axis=0))
            np.add.at(gc[:, 2], idx, (dq * dy * dy).sum(axis=0))
        if mean2d.requires_grad:
            mean2d._accumulate(gm)
        if conic.requires_grad:
            conic._accumulate(gc)
        if color.requires_grad:
            gcol_flat = gcol
            color._accumulate(gcol_flat)
        if opacity.requires_grad:
            opacity._accumulate(gal)

    out = Tensor._from_op(image, (mean2d, conic, color, opacity),
                          lambda grad: backward(grad))
    return out, records
