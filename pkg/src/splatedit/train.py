"""Distillation trainers: rendered-image matching and score distillation.

train_din fits the predictor so that rendering the overlaid scene at a
triplet's camera reproduces the stored target image (mean squared error).
train_sds instead injects a teacher's denoising residual as the gradient of
a downsampled render, never needing target pixels at the render resolution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .diffusion import NoiseSchedule, linear_schedule
from .noise import derive_seed, materialize_noise
from .optim import AdamW, TrainingError
from .predictor import VariationPredictor
from .raster import render_graph
from .scene import GaussianScene


@dataclass
class TrainConfig:
    batch_size: int = 4
    epochs: int = 100
    lr: float = 1e-3
    lr_half_period: int = 100
    weight_decay: float = 5e-3
    loss: str = "din"
    sds_t_start_frac: float = 0.8
    sds_t_end_frac: float = 0.1
    sds_latent_downsample: int = 4
    sds_weight: float = 1.0
    # accepted for manifest compatibility; analytic oracles have no guidance
    guidance_scale: float = 6.5
    condition_scale: float = 3.5
    seed: int = 0
    log_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.lr < 0:
            raise TrainingError("batch size, epochs and lr must be positive")


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)  # per-epoch means
    lr_history: list = field(default_factory=list)


def save_loss_csv(result: TrainResult, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "lr"])
        for i, (loss, lr) in enumerate(zip(result.losses, result.lr_history)):
            writer.writerow([i, loss, lr])


def overlay_graph(scene: GaussianScene, deltas: dict) -> dict:
    """Differentiable overlay of predicted deltas onto a scene's attributes."""
    mu = Tensor(scene.mu) + deltas["delta_mu"]
    scale = (Tensor(scene.scale) + deltas["delta_scale"]).clip(1e-6, None)
    opacity = (Tensor(scene.opacity) + deltas["delta_opacity"]).clip(1e-6, 1.0 - 1e-6)
    color = Tensor(scene.color) + deltas["delta_color"]
    rot = Tensor(scene.rot) + deltas["delta_rot"]
    norm = ((rot * rot).sum(axis=1, keepdims=True) + 1e-12) ** 0.5
    return {"mu": mu, "scale": scale, "opacity": opacity, "color": color,
            "rot": rot / norm}


def render_edit(predictor: VariationPredictor, scene: GaussianScene, y: str,
                eps_seed: int, camera, background=(0.0, 0.0, 0.0),
                mode: str = "iterative"):
    deltas = predictor.predict_tensors(scene, y, eps_seed, mode)
    attrs = overlay_graph(scene, deltas)
    image, _ = render_graph(attrs["mu"], attrs["scale"], attrs["opacity"],
                            attrs["color"], attrs["rot"], camera, background)
    return image


def _clear_graph(out: Tensor, keep: set):
    """Drop accumulated gradients on intermediates, keeping parameter grads."""
    stack, seen = [out], set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if id(node) not in keep:
            node.grad = None
        stack.extend(node._parents)


def train_din(predictor: VariationPredictor, scenes: dict, triplets,
              config: TrainConfig, mode: str = "iterative",
              background=(0.0, 0.0, 0.0), on_epoch=None) -> TrainResult:
    if not triplets:
        raise TrainingError("empty triplet dataset")
    if config.loss != "din":
        raise TrainingError(f"train_din called with loss {config.loss!r}")
    opt = AdamW(predictor.params.params, lr=config.lr,
                weight_decay=config.weight_decay)
    targets = {t.triplet_id: t.load_target().astype(np.float32) for t in triplets}
    order_rng = np.random.default_rng(config.seed)
    result = TrainResult()
    param_ids = {id(t) for t in predictor.params.params.values()}

    for epoch in range(config.epochs):
        opt.lr = config.lr * 0.5 ** (epoch // config.lr_half_period)
        order = order_rng.permutation(len(triplets))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [triplets[i] for i in order[start:start + config.batch_size]]
            opt.zero_grad()
            batch_loss = 0.0
            for trip in batch:
                scene = scenes[trip.scene_ref]
                image = render_edit(predictor, scene, trip.instruction,
                                    trip.eps_seed, trip.camera, background, mode)
                diff = image - Tensor(targets[trip.triplet_id])
                loss = (diff * diff).mean() * (1.0 / len(batch))
                if not np.isfinite(loss.data):
                    raise TrainingError(
                        "non-finite loss on triplets "
                        + ", ".join(t.triplet_id for t in batch))
                loss.backward()
                _clear_graph(loss, param_ids)
                batch_loss += float(loss.data)
            opt.step()
            epoch_losses.append(batch_loss)
        result.losses.append(float(np.mean(epoch_losses)))
        result.lr_history.append(opt.lr)
        if on_epoch is not None:
            on_epoch(epoch, result.losses[-1])
        if config.log_every and epoch % config.log_every == 0:
            print(f"epoch {epoch:4d}  loss {result.losses[-1]:.6f}")
    return result


def downsample_area(image: Tensor, factor: int) -> Tensor:
    h, w, c = image.shape
    if h % factor or w % factor:
        raise TrainingError(f"image {h}x{w} not divisible by {factor}")
    x = image.reshape(h // factor, factor, w // factor, factor, c)
    return x.mean(axis=3).mean(axis=1)


def exact_noise_teacher(target_latent: np.ndarray, schedule: NoiseSchedule):
    """Teacher whose prediction is the exact noise that maps z_t back to target."""
    def predict(z_t, t, y):
        ab = schedule.alpha_bar[t]
        return (z_t - np.sqrt(ab) * target_latent) / np.sqrt(1.0 - ab)
    return predict


def train_sds(predictor: VariationPredictor, scenes: dict, instructions,
              noise_predictor_for, config: TrainConfig,
              schedule: NoiseSchedule | None = None,
              cameras: dict | None = None, eps_seeds=(0,),
              background=(0.0, 0.0, 0.0), on_epoch=None) -> TrainResult:
    """Score-distillation training loop.

    ``noise_predictor_for(scene_name, y)`` returns a teacher callable
    ``(z_t, t, y) -> eps_hat``; ``cameras`` maps scene name to a Camera.
    The timestep decays linearly over epochs between the configured
    fractions of the schedule length; w(t) is constant (config.sds_weight).
    """
    if config.loss != "sds":
        raise TrainingError(f"train_sds called with loss {config.loss!r}")
    schedule = schedule if schedule is not None else linear_schedule()
    opt = AdamW(predictor.params.params, lr=config.lr,
                weight_decay=config.weight_decay)
    names = sorted(scenes)
    result = TrainResult()
    param_ids = {id(t) for t in predictor.params.params.values()}
    t_steps = schedule.t_steps

    for epoch in range(config.epochs):
        opt.lr = config.lr * 0.5 ** (epoch // config.lr_half_period)
        frac = epoch / max(config.epochs - 1, 1)
        t_frac = (config.sds_t_start_frac
                  + frac * (config.sds_t_end_frac - config.sds_t_start_frac))
        t = int(np.clip(round(t_frac * t_steps), 1, t_steps))
        ab = schedule.alpha_bar[t]
        epoch_losses = []
        step_i = 0
        for name in names:
            for y in instructions:
                for eps_seed in eps_seeds:
                    opt.zero_grad()
                    cam = cameras[name]
                    image = render_edit(predictor, scenes[name], y, eps_seed,
                                        cam, background)
                    z = downsample_area(image, config.sds_latent_downsample)
                    noise_seed = derive_seed(config.seed, epoch, step_i, 7)
                    eps = materialize_noise(noise_seed, z.shape).astype(np.float64)
                    z_t = np.sqrt(ab) * z.data + np.sqrt(1.0 - ab) * eps
                    teacher = noise_predictor_for(name, y)
                    residual = config.sds_weight * (teacher(z_t, t, y) - eps)
                    if not np.all(np.isfinite(residual)):
                        raise TrainingError(
                            f"non-finite teacher residual for ({name}, {y!r})")
                    if config.sds_weight != 0.0:
                        z.backward(residual.astype(np.float32))
                        _clear_graph(z, param_ids)
                        opt.step()
                    epoch_losses.append(float(np.abs(residual).mean()))
                    step_i += 1
        result.losses.append(float(np.mean(epoch_losses)))
        result.lr_history.append(opt.lr)
        if on_epoch is not None:
            on_epoch(epoch, result.losses[-1])
        if config.log_every and epoch % config.log_every == 0:
            print(f"epoch {epoch:4d}  residual {result.losses[-1]:.6f}")
    return result
