"""Evaluation metrics: image error, geometry preservation, runtime scaling."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .autodiff import ShapeError

PSNR_CAP = 99.0


class MetricInputError(ValueError):
    pass


@dataclass(frozen=True)
class MetricReport:
    name: str
    value: float
    context: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def mse_psnr(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return 0.0, PSNR_CAP
    return mse, min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP)


def chamfer_fscore(mu_a: np.ndarray, mu_b: np.ndarray,
                   tau: float = 0.01) -> tuple[float, float]:
    """Symmetric mean squared nearest-neighbor distance and F-score at tau."""
    mu_a = np.asarray(mu_a, dtype=np.float64).reshape(-1, 3)
    mu_b = np.asarray(mu_b, dtype=np.float64).reshape(-1, 3)
    if mu_a.shape[0] == 0 or mu_b.shape[0] == 0:
        raise MetricInputError("point sets must be non-empty")
    d_ab, _ = cKDTree(mu_b).query(mu_a)
    d_ba, _ = cKDTree(mu_a).query(mu_b)
    chamfer = float(0.5 * ((d_ab ** 2).mean() + (d_ba ** 2).mean()))
    precision = float((d_ab <= tau).mean())
    recall = float((d_ba <= tau).mean())
    if precision + recall == 0.0:
        return chamfer, 0.0
    return chamfer, 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class LinearityReport:
    sizes: tuple
    medians: tuple      # seconds per size
    slope: float
    intercept: float
    r_squared: float


def runtime_linearity(op, sizes, repeats: int = 3) -> LinearityReport:
    """Median wall-clock of ``op(size)`` per size with a least-squares fit."""
    sizes = list(sizes)
    if len(sizes) < 3:
        raise MetricInputError("need at least 3 sizes for a linearity fit")
    medians = []
    for size in sizes:
        samples = []
        for _ in range(repeats):
            start = time.perf_counter()
            op(size)
            samples.append(time.perf_counter() - start)
        medians.append(float(np.median(samples)))
    x = np.asarray(sizes, dtype=np.float64)
    y = np.asarray(medians, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearityReport(sizes=tuple(sizes), medians=tuple(medians),
                           slope=float(slope), intercept=float(intercept),
                           r_squared=float(r2))
