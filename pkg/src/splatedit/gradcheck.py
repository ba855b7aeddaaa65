"""Central-difference validation of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


class GradCheckError(RuntimeError):
    pass


@dataclass
class GradCheckReport:
    max_rel_err: float
    rel_err: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    coordinates_checked: int = field(default=0)

    def passed(self, tol: float = 1e-3) -> bool:
        return self.max_rel_err <= tol


def grad_check(fn, point: np.ndarray, step: float = 1e-3,
               max_coords: int | None = None, seed: int = 0) -> GradCheckReport:
    """Compare reverse-mode gradients of ``fn`` against central differences.

    ``fn`` maps a Tensor to a scalar Tensor.  Evaluation runs in float64 so
    the finite-difference oracle is not drowned by float32 rounding.  When
    ``max_coords`` is given, a random coordinate subset is checked.
    """
    x64 = np.asarray(point, dtype=np.float64)
    leaf = Tensor(x64.copy(), requires_grad=True)
    out = fn(leaf)
    if out.data.size != 1:
        raise GradCheckError("grad_check target must be scalar-valued")
    if not np.isfinite(out.data):
        raise GradCheckError("non-finite function value at the base point")
    out.backward()
    analytic = leaf.grad.reshape(-1).copy()

    flat = x64.reshape(-1)
    n = flat.size
    coords = np.arange(n)
    if max_coords is not None and max_coords < n:
        coords = np.random.default_rng(seed).choice(n, size=max_coords, replace=False)

    numeric = np.zeros(coords.size, dtype=np.float64)
    for j, i in enumerate(coords):
        for sign, slot in ((+1, 0), (-1, 1)):
            pert = flat.copy()
            pert[i] += sign * step
            val = fn(Tensor(pert.reshape(x64.shape))).data
            if not np.isfinite(val):
                raise GradCheckError(f"non-finite function value at coordinate {i}")
            if slot == 0:
                fp = float(val)
            else:
                fm = float(val)
        numeric[j] = (fp - fm) / (2.0 * step)

    a = analytic[coords]
    denom = np.maximum(np.abs(a) + np.abs(numeric), 1e-4)
    rel = np.abs(a - numeric) / denom
    return GradCheckReport(max_rel_err=float(rel.max(initial=0.0)), rel_err=rel,
                           analytic=a, numeric=numeric, coordinates_checked=coords.size)
