"""Pinhole camera with a rigid world-to-camera transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray     # [3,3] world-to-camera
    translation: np.ndarray  # [3]
    near: float = 0.05

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise CameraError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise CameraError("image size must be at least 1x1")
        if self.near <= 0:
            raise CameraError("near plane must be positive")
        object.__setattr__(self, "rotation",
                           np.ascontiguousarray(self.rotation, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "translation",
                           np.ascontiguousarray(self.translation, dtype=np.float64).reshape(3))

    def to_json(self) -> dict:
        w2c = np.concatenate([self.rotation, self.translation[:, None]], axis=1)
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height, "near": self.near,
                "world_to_camera": [float(x) for x in w2c.reshape(-1)]}

    @staticmethod
    def from_json(obj: dict) -> "Camera":
        try:
            w2c = np.asarray(obj["world_to_camera"], dtype=np.float64).reshape(3, 4)
            return Camera(fx=float(obj["fx"]), fy=float(obj["fy"]),
                          cx=float(obj["cx"]), cy=float(obj["cy"]),
                          width=int(obj["width"]), height=int(obj["height"]),
                          near=float(obj.get("near", 0.05)),
                          rotation=w2c[:, :3], translation=w2c[:, 3])
        except (KeyError, ValueError, TypeError) as exc:
            raise CameraError(f"malformed camera JSON: {exc}") from exc


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0), width=64, height=64,
            fov_deg=50.0, near=0.05) -> Camera:
    """Camera at ``eye`` looking at ``target`` (camera z points forward)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - eye
    fwd = fwd / np.linalg.norm(fwd)
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, upv)
    if np.linalg.norm(right) < 1e-9:
        upv = np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, upv)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rotation = np.stack([right, down, fwd], axis=0)
    translation = -rotation @ eye
    f = 0.5 * width / np.tan(np.radians(fov_deg) / 2)
    return Camera(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
                  width=width, height=height, near=near,
                  rotation=rotation, translation=translation)


def orbit_camera(azimuth_deg: float, elevation_deg: float, radius: float,
                 target=(0.0, 0.0, 0.0), width=64, height=64, fov_deg=50.0,
                 near=0.05) -> Camera:
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    target = np.asarray(target, dtype=np.float64)
    eye = target + radius * np.array([np.cos(el) * np.sin(az),
                                      np.sin(el),
                                      np.cos(el) * np.cos(az)])
    return look_at(eye, target, width=width, height=height, fov_deg=fov_deg, near=near)
