"""Explicit 3DGS scene model, per-primitive variations, and their algebra.

Scenes and variations are immutable values: every operation returns a new
object.  Variations live in activated attribute space, so overlay is literal
addition followed by a feasibility projection (opacity/scale clamps and
quaternion renormalization).
"""

from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

OPACITY_MIN = 1e-6
OPACITY_MAX = 1.0 - 1e-6
SCALE_MIN = 1e-7

SIDECAR_MAGIC = b"SPLV"
SIDECAR_VERSION = 1


class AlignmentError(ValueError):
    """Variation and scene do not share primitive count or identity."""


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianScene:
    mu: np.ndarray        # [N,3] world positions
    scale: np.ndarray     # [N,3] positive axis scales
    opacity: np.ndarray   # [N] in (0,1)
    color: np.ndarray     # [N,3] RGB in [0,1] (sh degree 0)
    rot: np.ndarray       # [N,4] unit quaternions (w,x,y,z)

    def __post_init__(self):
        n = self.mu.shape[0]
        for name, arr, shape in (("mu", self.mu, (n, 3)), ("scale", self.scale, (n, 3)),
                                 ("opacity", self.opacity, (n,)),
                                 ("color", self.color, (n, 3)), ("rot", self.rot, (n, 4))):
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                bad = int(np.argwhere(~np.isfinite(arr))[0][0])
                raise DataError(f"non-finite value in {name} at primitive {bad}")
        if n > 0:
            if self.scale.min() <= 0:
                raise DataError("scale components must be strictly positive")
            if self.opacity.min() <= 0 or self.opacity.max() >= 1:
                raise DataError("opacity must lie in the open interval (0,1)")
            norms = np.linalg.norm(self.rot, axis=1)
            if np.abs(norms - 1.0).max() > 1e-5:
                raise DataError("quaternions must be unit length within 1e-5")

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def scene_id(self) -> str:
        """Content digest; variations record it to assert alignment."""
        h = hashlib.sha256()
        for arr in (self.mu, self.scale, self.opacity, self.color, self.rot):
            h.update(np.ascontiguousarray(arr, dtype=np.float32).tobytes())
        return h.hexdigest()[:16]

    def attributes(self) -> np.ndarray:
        """Per-primitive 14-wide attribute matrix in (mu, s, alpha, c, r) order."""
        return np.concatenate(
            [self.mu, self.scale, self.opacity[:, None], self.color, self.rot],
            axis=1).astype(np.float32)


def make_scene(mu, scale, opacity, color, rot) -> GaussianScene:
    f32 = lambda a: np.ascontiguousarray(a, dtype=np.float32)
    return GaussianScene(f32(mu), f32(scale), f32(opacity), f32(color), f32(rot))


@dataclass(frozen=True)
class Variation:
    delta_mu: np.ndarray       # [N,3]
    delta_scale: np.ndarray    # [N,3]
    delta_opacity: np.ndarray  # [N]
    delta_color: np.ndarray    # [N,3]
    delta_rot: np.ndarray      # [N,4]
    scene_id: str
    empty_selection: bool = field(default=False, compare=False)

    FIELDS = ("delta_mu", "delta_scale", "delta_opacity", "delta_color", "delta_rot")

    def __post_init__(self):
        n = self.delta_mu.shape[0]
        shapes = {"delta_mu": (n, 3), "delta_scale": (n, 3), "delta_opacity": (n,),
                  "delta_color": (n, 3), "delta_rot": (n, 4)}
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise AlignmentError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite value in {name}")

    @property
    def n(self) -> int:
        return self.delta_mu.shape[0]

    def arrays(self):
        return tuple(getattr(self, f) for f in self.FIELDS)

    def map(self, fn) -> "Variation":
        return Variation(*[np.ascontiguousarray(fn(a), dtype=np.float32)
                           for a in self.arrays()], scene_id=self.scene_id)

    def __add__(self, other: "Variation") -> "Variation":
        _check_aligned_pair(self, other)
        return Variation(*[a + b for a, b in zip(self.arrays(), other.arrays())],
                         scene_id=self.scene_id)

    def max_abs(self) -> float:
        return max(float(np.abs(a).max(initial=0.0)) for a in self.arrays())


def zero_variation(scene: GaussianScene) -> Variation:
    n = scene.n
    z = lambda *s: np.zeros(s, dtype=np.float32)
    return Variation(z(n, 3), z(n, 3), z(n), z(n, 3), z(n, 4), scene_id=scene.scene_id)


def _check_alignment(scene: GaussianScene, v: Variation):
    if v.n != scene.n:
        raise AlignmentError(f"variation N={v.n} does not match scene N={scene.n}")
    if v.scene_id != scene.scene_id:
        raise AlignmentError("variation scene_id does not match scene")


def _check_aligned_pair(a: Variation, b: Variation):
    if a.n != b.n or a.scene_id != b.scene_id:
        raise AlignmentError("variations align to different scenes")


# -- algebra -------------------------------------------------------------------


def overlay(scene: GaussianScene, v: Variation) -> GaussianScene:
    """Attribute-wise addition followed by a feasibility projection."""
    _check_alignment(scene, v)
    mu = scene.mu + v.delta_mu
    scale = np.maximum(scene.scale + v.delta_scale, SCALE_MIN)
    opacity = np.clip(scene.opacity + v.delta_opacity, OPACITY_MIN, OPACITY_MAX)
    color = scene.color + v.delta_color
    rot = scene.rot + v.delta_rot
    norms = np.linalg.norm(rot.astype(np.float64), axis=1, keepdims=True)
    # leave near-unit rows untouched so a zero variation is bit-exact
    needs = (np.abs(norms - 1.0) > 1e-6)[:, 0]
    rot = rot.copy()
    rot[needs] = (rot[needs] / np.maximum(norms[needs], 1e-12)).astype(np.float32)
    return make_scene(mu, scale, opacity, color, rot)


def scale_variation(v: Variation, w) -> Variation:
    """Multiply each delta array by a scalar or a per-attribute weight dict."""
    if isinstance(w, dict):
        weights = [w.get(name.removeprefix("delta_"), 1.0) for name in Variation.FIELDS]
    else:
        weights = [float(w)] * 5
    if not all(np.isfinite(weights)):
        raise DataError("non-finite scale weight")
    return Variation(*[np.ascontiguousarray(a * wi, dtype=np.float32)
                       for a, wi in zip(v.arrays(), weights)], scene_id=v.scene_id)


def mix_variations(v1: Variation, v2: Variation, weight) -> Variation:
    """Per-primitive convex combination w*v1 + (1-w)*v2."""
    _check_aligned_pair(v1, v2)
    w = np.asarray(weight, dtype=np.float32)
    if w.ndim == 0:
        w = np.full(v1.n, float(w), dtype=np.float32)
    if w.shape != (v1.n,):
        raise AlignmentError(f"weight field shape {w.shape} does not match N={v1.n}")
    out = []
    for a, b in zip(v1.arrays(), v2.arrays()):
        wf = w if a.ndim == 1 else w[:, None]
        out.append(np.ascontiguousarray(wf * a + (1.0 - wf) * b, dtype=np.float32))
    return Variation(*out, scene_id=v1.scene_id)


# -- region selectors -----------------------------------------------------------


@dataclass(frozen=True)
class BoxSelector:
    lo: tuple
    hi: tuple

    def select(self, mu: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.lo, dtype=np.float32)
        hi = np.asarray(self.hi, dtype=np.float32)
        return np.all((mu >= lo) & (mu <= hi), axis=1)


@dataclass(frozen=True)
class SphereSelector:
    center: tuple
    radius: float

    def select(self, mu: np.ndarray) -> np.ndarray:
        c = np.asarray(self.center, dtype=np.float32)
        return np.linalg.norm(mu - c, axis=1) <= self.radius


@dataclass(frozen=True)
class IndexSelector:
    indices: tuple

    def select(self, mu: np.ndarray) -> np.ndarray:
        mask = np.zeros(mu.shape[0], dtype=bool)
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= mu.shape[0]):
            raise DataError("selector index out of range")
        mask[idx] = True
        return mask


def selector_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "box":
        return BoxSelector(tuple(obj["lo"]), tuple(obj["hi"]))
    if kind == "sphere":
        return SphereSelector(tuple(obj["center"]), float(obj["radius"]))
    if kind == "indices":
        return IndexSelector(tuple(int(i) for i in obj["indices"]))
    raise DataError(f"unknown selector kind {kind!r}")


def mask_variation(v: Variation, selector, scene: GaussianScene) -> Variation:
    """Zero deltas outside the selected region of the source scene."""
    _check_alignment(scene, v)
    mask = selector.select(scene.mu)
    out = v.map(lambda a: a * (mask if a.ndim == 1 else mask[:, None]))
    if not mask.any():
        out = replace(out, empty_selection=True)
    return out


# -- sidecar serialization -------------------------------------------------------
# layout: magic(4) version(u32) N(u64) scene_id(16 bytes ascii hex)
#         then five little-endian f32 arrays in Variation.FIELDS order


def save_variation(v: Variation, path):
    buf = io.BytesIO()
    buf.write(SIDECAR_MAGIC)
    buf.write(struct.pack("<IQ", SIDECAR_VERSION, v.n))
    buf.write(v.scene_id.encode("ascii")[:16].ljust(16, b"\0"))
    for a in v.arrays():
        buf.write(np.ascontiguousarray(a, dtype="<f4").tobytes())
    data = buf.getvalue()
    if hasattr(path, "write"):
        path.write(data)
    else:
        with open(path, "wb") as f:
            f.write(data)
    return data


def variation_to_bytes(v: Variation) -> bytes:
    buf = io.BytesIO()
    save_variation(v, buf)
    return buf.getvalue()


def load_variation(path) -> Variation:
    if isinstance(path, (bytes, bytearray)):
        data = bytes(path)
    elif hasattr(path, "read"):
        data = path.read()
    else:
        with open(path, "rb") as f:
            data = f.read()
    if data[:4] != SIDECAR_MAGIC:
        raise DataError("bad variation sidecar magic")
    version, n = struct.unpack_from("<IQ", data, 4)
    if version != SIDECAR_VERSION:
        raise DataError(f"unsupported sidecar version {version}")
    scene_id = data[16:32].rstrip(b"\0").decode("ascii")
    off = 32
    arrays = []
    for width in (3, 3, 1, 3, 4):
        count = n * width
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off).copy()
        off += count * 4
        arrays.append(arr.reshape(n, width) if width > 1 else arr)
    return Variation(*arrays, scene_id=scene_id)
