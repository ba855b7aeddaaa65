"""EWA projection of 3D Gaussians to screen-space 2D Gaussians.

Two parallel implementations live here: a plain numpy one backing the
public ``project_ewa`` contract (and culling decisions), and an autodiff
one (``project_tensors``) used inside the differentiable render graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, matmul, stack
from ..camera import Camera


def quat_to_rotmat(rot: np.ndarray) -> np.ndarray:
    """[N,4] unit quaternions (w,x,y,z) -> [N,3,3] rotation matrices."""
    q = rot / np.linalg.norm(rot, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=q.dtype)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def world_covariance(scale: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """Sigma = R diag(s) diag(s) R^T for one or many primitives."""
    scale = np.asarray(scale, dtype=np.float64)
    rot = np.asarray(rot, dtype=np.float64)
    single = scale.ndim == 1
    if single:
        scale, rot = scale[None], rot[None]
    r = quat_to_rotmat(rot)
    m = r * scale[:, None, :]
    cov = m @ np.swapaxes(m, -1, -2)
    return cov[0] if single else cov


@dataclass(frozen=True)
class ProjectedGaussian:
    mean2d: np.ndarray   # [2] pixels
    cov2d: np.ndarray    # [2,2] pixels^2, low-pass regularized
    depth: float         # camera-space z
    color: np.ndarray
    opacity: float
    index: int           # primitive index in the source scene


def _project_arrays(mu, scale, rot, cam: Camera, lowpass: float):
    """Vectorized plain-numpy EWA projection; returns per-primitive arrays."""
    rc = cam.rotation
    t = mu @ rc.T + cam.translation  # [N,3] camera space
    tz = t[:, 2]
    safe_z = np.where(tz > 1e-9, tz, 1.0)
    u = cam.fx * t[:, 0] / safe_z + cam.cx
    v = cam.fy * t[:, 1] / safe_z + cam.cy
    mean2d = np.stack([u, v], axis=1)

    cov3 = world_covariance(scale, rot)
    n = mu.shape[0]
    j = np.zeros((n, 2, 3))
    j[:, 0, 0] = cam.fx / safe_z
    j[:, 0, 2] = -cam.fx * t[:, 0] / safe_z ** 2
    j[:, 1, 1] = cam.fy / safe_z
    j[:, 1, 2] = -cam.fy * t[:, 1] / safe_z ** 2
    jw = j @ rc
    cov2 = jw @ cov3 @ np.swapaxes(jw, -1, -2)
    cov2[:, 0, 0] += lowpass
    cov2[:, 1, 1] += lowpass
    return mean2d, cov2, t


def footprint_radius(cov2: np.ndarray, sigma: float) -> np.ndarray:
    a = cov2[..., 0, 0]
    b = cov2[..., 0, 1]
    c = cov2[..., 1, 1]
    mid = 0.5 * (a + c)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - (a * c - b * b), 0.0))
    return sigma * np.sqrt(np.maximum(lam_max, 0.0))


def cull_mask(mu, scale, rot, cam: Camera, lowpass: float, sigma: float) -> np.ndarray:
    """Keep primitives in front of the near plane with footprints touching the image."""
    mean2d, cov2, t = _project_arrays(mu, scale, rot, cam, lowpass)
    radius = footprint_radius(cov2, sigma)
    keep = t[:, 2] > cam.near
    keep &= mean2d[:, 0] + radius >= 0
    keep &= mean2d[:, 0] - radius <= cam.width
    keep &= mean2d[:, 1] + radius >= 0
    keep &= mean2d[:, 1] - radius <= cam.height
    return keep


def project_ewa(scene, cam: Camera, lowpass: float = 0.3,
                sigma: float = 3.5) -> list[ProjectedGaussian]:
    keep = cull_mask(scene.mu, scene.scale, scene.rot, cam, lowpass, sigma)
    mean2d, cov2, t = _project_arrays(scene.mu, scene.scale, scene.rot, cam, lowpass)
    return [ProjectedGaussian(mean2d[i], cov2[i], float(t[i, 2]),
                              scene.color[i], float(scene.opacity[i]), int(i))
            for i in np.where(keep)[0]]


# -- autodiff pipeline ----------------------------------------------------------


def quat_to_rotmat_tensor(rot: Tensor) -> Tensor:
    norm = ((rot * rot).sum(axis=1, keepdims=True)) ** 0.5
    q = rot / norm
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    two = 2.0
    r00 = 1.0 - two * (y * y + z * z)
    r01 = two * (x * y - w * z)
    r02 = two * (x * z + w * y)
    r10 = two * (x * y + w * z)
    r11 = 1.0 - two * (x * x + z * z)
    r12 = two * (y * z - w * x)
    r20 = two * (x * z - w * y)
    r21 = two * (y * z + w * x)
    r22 = 1.0 - two * (x * x + y * y)
    rows = [stack([r00, r01, r02], axis=1),
            stack([r10, r11, r12], axis=1),
            stack([r20, r21, r22], axis=1)]
    return stack(rows, axis=1)


def project_tensors(mu: Tensor, scale: Tensor, rot: Tensor, cam: Camera,
                    lowpass: float = 0.3):
    """Differentiable EWA projection.

    Returns (mean2d [N,2], conic [N,3] = inverse-covariance components
    (a, b, c), cov_diag components for footprint math are taken from the
    plain pipeline by the caller).
    """
    n = mu.shape[0]
    dtype = mu.dtype
    rc = cam.rotation.astype(dtype)
    t = matmul(mu, Tensor(rc.T)) + Tensor(cam.translation.astype(dtype))
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    inv_z = tz ** -1.0
    u = tx * inv_z * cam.fx + cam.cx
    v = ty * inv_z * cam.fy + cam.cy
    mean2d = stack([u, v], axis=1)

    rmat = quat_to_rotmat_tensor(rot)
    m = rmat * scale.reshape(n, 1, 3)
    cov3 = matmul(m, m.transpose(0, 2, 1))

    zeros = Tensor(np.zeros(n, dtype=dtype))
    j0 = stack([inv_z * cam.fx, zeros, tx * (inv_z * inv_z) * (-cam.fx)], axis=1)
    j1 = stack([zeros, inv_z * cam.fy, ty * (inv_z * inv_z) * (-cam.fy)], axis=1)
    j = stack([j0, j1], axis=1)  # [N,2,3]
    jw = matmul(j, Tensor(np.broadcast_to(rc, (1, 3, 3)).copy()))
    cov2 = matmul(matmul(jw, cov3), jw.transpose(0, 2, 1))
    a = cov2[:, 0, 0] + lowpass
    b = cov2[:, 0, 1]
    c = cov2[:, 1, 1] + lowpass
    det = a * c - b * b
    inv_det = det ** -1.0
    conic = stack([c * inv_det, b * inv_det * -1.0, a * inv_det], axis=1)
    return mean2d, conic, tz
