"""Binary little-endian PLY interop for Gaussian splat scenes.

On-disk convention follows the common 3DGS layout: opacity stored as a
pre-sigmoid logit, scales as log-scales, color as the spherical-harmonic DC
coefficient.  Loading applies the activations; saving inverts them.
"""

from __future__ import annotations

import numpy as np

from .scene import GaussianScene, make_scene

SH_C0 = 0.28209479177387814

REQUIRED_PROPS = ["x", "y", "z", "opacity",
                  "scale_0", "scale_1", "scale_2",
                  "rot_0", "rot_1", "rot_2", "rot_3",
                  "f_dc_0", "f_dc_1", "f_dc_2"]


class PlyFormatError(ValueError):
    pass


def color_from_dc(f_dc: np.ndarray) -> np.ndarray:
    return 0.5 + SH_C0 * f_dc


def dc_from_color(color: np.ndarray) -> np.ndarray:
    return (color - 0.5) / SH_C0


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    return np.log(p / (1.0 - p))


def load_ply(path) -> GaussianScene:
    if hasattr(path, "read"):
        data = path.read()
    else:
        with open(path, "rb") as f:
            data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise PlyFormatError("not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    if not any(line.strip() == "format binary_little_endian 1.0" for line in header):
        raise PlyFormatError("expected format binary_little_endian 1.0")

    count = None
    props: list[str] = []
    for line in header:
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            count = int(tok[2])
        elif tok and tok[0] == "element" and count is not None and props:
            break
        elif tok[:2] == ["property", "float"] and count is not None:
            props.append(tok[2])
    if count is None:
        raise PlyFormatError("missing vertex element")
    for p in REQUIRED_PROPS:
        if p not in props:
            raise PlyFormatError(f"missing vertex property {p!r}")

    dtype = np.dtype([(p, "<f4") for p in props])
    rec = np.frombuffer(body, dtype=dtype, count=count)

    cols = {p: rec[p].astype(np.float32) for p in REQUIRED_PROPS}
    for name, arr in cols.items():
        if not np.all(np.isfinite(arr)):
            idx = int(np.argwhere(~np.isfinite(arr))[0][0])
            raise PlyFormatError(f"non-finite {name} at vertex {idx}")

    mu = np.stack([cols["x"], cols["y"], cols["z"]], axis=1)
    scale = np.exp(np.stack([cols["scale_0"], cols["scale_1"], cols["scale_2"]], axis=1))
    opacity = np.clip(_sigmoid(cols["opacity"]), 1e-6, 1 - 1e-6)
    color = color_from_dc(np.stack([cols["f_dc_0"], cols["f_dc_1"], cols["f_dc_2"]], axis=1))
    rot = np.stack([cols["rot_0"], cols["rot_1"], cols["rot_2"], cols["rot_3"]], axis=1)
    if count > 0:
        norms = np.linalg.norm(rot, axis=1, keepdims=True)
        if norms.min() <= 0:
            raise PlyFormatError("zero-norm quaternion")
        rot = rot / norms
    return make_scene(mu, scale, opacity, color, rot)


def save_ply(scene: GaussianScene, path) -> int:
    """Write the scene; returns the number of opacity values clamped."""
    opacity = scene.opacity.astype(np.float64)
    clamped = int(np.count_nonzero((opacity <= 1e-6) | (opacity >= 1 - 1e-6)))
    opacity = np.clip(opacity, 1e-6, 1 - 1e-6)

    n = scene.n
    dtype = np.dtype([(p, "<f4") for p in REQUIRED_PROPS])
    rec = np.zeros(n, dtype=dtype)
    rec["x"], rec["y"], rec["z"] = scene.mu.T
    rec["opacity"] = _logit(opacity)
    log_scale = np.log(scene.scale.astype(np.float64))
    rec["scale_0"], rec["scale_1"], rec["scale_2"] = log_scale.T
    rec["rot_0"], rec["rot_1"], rec["rot_2"], rec["rot_3"] = scene.rot.T
    dc = dc_from_color(scene.color.astype(np.float64))
    rec["f_dc_0"], rec["f_dc_1"], rec["f_dc_2"] = dc.T

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {p}" for p in REQUIRED_PROPS]
    header.append("end_header")
    blob = ("\n".join(header) + "\n").encode("ascii") + rec.tobytes()
    if hasattr(path, "write"):
        path.write(blob)
    else:
        with open(path, "wb") as f:
            f.write(blob)
    return clamped
