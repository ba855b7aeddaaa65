"""Noise schedules, the DDIM update, and DDPM inversion with replay.

The predictors passed in are plain callables: ``predictor(x, t)`` for DDIM
and ``predictor(x, t, condition)`` for the conditioned inversion/replay
pair.  Everything here is small dense numpy; no learned sampler state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import materialize_noise


class ScheduleError(ValueError):
    pass


class NoiseRecordError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray       # [T], index t-1 holds beta_t
    alpha_bar: np.ndarray   # [T+1], alpha_bar[0] == 1

    @property
    def t_steps(self) -> int:
        return self.betas.size

    @staticmethod
    def from_betas(betas) -> "NoiseSchedule":
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ScheduleError("schedule needs at least one beta")
        if not ((betas > 0) & (betas < 1)).all():
            raise ScheduleError("every beta must lie in (0, 1)")
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        return NoiseSchedule(betas=betas, alpha_bar=alpha_bar)

    def check_t(self, t: int):
        if not 1 <= t <= self.t_steps:
            raise ScheduleError(f"timestep {t} outside schedule range "
                                f"1..{self.t_steps}")

    def sigma(self, t: int) -> float:
        """DDPM-matching transition width; zero at t == 1 since alpha_bar_0 == 1."""
        self.check_t(t)
        ab_prev, ab = self.alpha_bar[t - 1], self.alpha_bar[t]
        return float(np.sqrt((1.0 - ab_prev) / (1.0 - ab))
                     * np.sqrt(1.0 - ab / ab_prev))


def linear_schedule(t_steps: int = 50, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> NoiseSchedule:
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, t_steps))


def ddim_step(x_t: np.ndarray, t: int, predictor, schedule: NoiseSchedule) -> np.ndarray:
    schedule.check_t(t)
    ab_prev, ab = schedule.alpha_bar[t - 1], schedule.alpha_bar[t]
    eps = predictor(x_t, t)
    x0_hat = (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps


def ddim_sample(x_T: np.ndarray, predictor, schedule: NoiseSchedule) -> np.ndarray:
    x = x_T
    for t in range(schedule.t_steps, 0, -1):
        x = ddim_step(x, t, predictor, schedule)
    return x


@dataclass(frozen=True)
class InversionRecord:
    trajectory: np.ndarray  # [T+1, ...] ground-truth latents x_0 .. x_T
    noises: np.ndarray      # [T+1, ...] correction noises, index t holds eps~_t


def _replay_step(x, t, eps_hat, schedule):
    ab_prev, ab = schedule.alpha_bar[t - 1], schedule.alpha_bar[t]
    sig = schedule.sigma(t)
    det = (np.sqrt(ab_prev / ab) * (x - np.sqrt(1.0 - ab) * eps_hat)
           + np.sqrt(max(1.0 - ab_prev - sig * sig, 0.0)) * eps_hat)
    return det, sig


def ddpm_invert(x_0: np.ndarray, predictor, schedule: NoiseSchedule,
                seed: int, condition=0.0) -> InversionRecord:
    """Forward-noise x_0, then extract the per-step correction noises.

    The t == 1 transition has zero width (sigma_1 == 0 for any schedule with
    alpha_bar_0 == 1), so no correction can be injected there; the forward
    draw itself is recorded instead and replay consumes it in place of a
    predictor call, which keeps the round trip exact.
    """
    x_0 = np.asarray(x_0, dtype=np.float64)
    t_steps = schedule.t_steps
    draws = materialize_noise(seed, (t_steps,) + x_0.shape).astype(np.float64)
    traj = np.empty((t_steps + 1,) + x_0.shape, dtype=np.float64)
    traj[0] = x_0
    for t in range(1, t_steps + 1):
        ab = schedule.alpha_bar[t]
        traj[t] = np.sqrt(ab) * x_0 + np.sqrt(1.0 - ab) * draws[t - 1]

    noises = np.zeros_like(traj)
    for t in range(t_steps, 1, -1):
        sig = schedule.sigma(t)
        if sig == 0.0:
            raise ScheduleError(f"sigma is zero at timestep {t}")
        eps_hat = predictor(traj[t], t, condition)
        pred_prev, _ = _replay_step(traj[t], t, eps_hat, schedule)
        noises[t] = (traj[t - 1] - pred_prev) / sig
    noises[1] = draws[0]
    return InversionRecord(trajectory=traj, noises=noises)


def ddpm_edit_replay(x_T: np.ndarray, noises: np.ndarray, predictor,
                     new_condition, schedule: NoiseSchedule) -> np.ndarray:
    if noises.shape[0] != schedule.t_steps + 1:
        raise NoiseRecordError(
            f"noise record covers {noises.shape[0] - 1} levels, schedule "
            f"needs {schedule.t_steps}")
    x = np.asarray(x_T, dtype=np.float64)
    for t in range(schedule.t_steps, 1, -1):
        eps_hat = predictor(x, t, new_condition)
        det, sig = _replay_step(x, t, eps_hat, schedule)
        x = det + sig * noises[t]
    ab_1 = schedule.alpha_bar[1]
    return (x - np.sqrt(1.0 - ab_1) * noises[1]) / np.sqrt(ab_1)
