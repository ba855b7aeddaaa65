"""Transformer building blocks on top of the autodiff core."""

from __future__ import annotations

import numpy as np

from .autodiff import ShapeError, Tensor, concat, matmul, softmax

LAYERNORM_EPS = 1e-5


class ConfigError(ValueError):
    pass


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYERNORM_EPS) -> Tensor:
    """Per-row zero-mean unit-variance normalization followed by affine."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return centered * inv * gain + bias


def attention(q: Tensor, k: Tensor, v: Tensor, heads: int = 1) -> Tensor:
    """Multi-head scaled dot-product attention.

    q: [Lq, d], k/v: [Lk, d]; heads concatenated back to [Lq, d].
    """
    lq, d = q.shape
    lk = k.shape[0]
    if d % heads != 0:
        raise ConfigError(f"model dim {d} not divisible by {heads} heads")
    if k.shape != (lk, d) or v.shape != (lk, d):
        raise ShapeError(f"key/value shapes {k.shape}/{v.shape} do not match dim {d}")
    hd = d // heads
    # [heads, L, hd]
    qh = q.reshape(lq, heads, hd).transpose(1, 0, 2)
    kh = k.reshape(lk, heads, hd).transpose(1, 0, 2)
    vh = v.reshape(lk, heads, hd).transpose(1, 0, 2)
    scores = matmul(qh, kh.transpose(0, 2, 1)) * (1.0 / np.sqrt(hd))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, vh)  # [heads, Lq, hd]
    return out.transpose(1, 0, 2).reshape(lq, d)


class Linear:
    """Affine map acting on the last axis; weights registered by name."""

    def __init__(self, params: "ParamStore", name: str, d_in: int, d_out: int,
                 zero_init: bool = False):
        rng = params.rng
        if zero_init:
            w = np.zeros((d_in, d_out), dtype=np.float32)
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / (d_in + d_out)), (d_in, d_out)).astype(np.float32)
        self.weight = params.add(f"{name}.weight", w)
        self.bias = params.add(f"{name}.bias", np.zeros(d_out, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        flat = x if x.ndim == 2 else x.reshape(-1, x.shape[-1])
        out = matmul(flat, self.weight) + self.bias
        if x.ndim != 2:
            out = out.reshape(*x.shape[:-1], self.weight.shape[1])
        return out


class LayerNorm:
    def __init__(self, params: "ParamStore", name: str, d: int):
        self.gain = params.add(f"{name}.gain", np.ones(d, dtype=np.float32))
        self.bias = params.add(f"{name}.bias", np.zeros(d, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class ParamStore:
    """Flat name -> Tensor registry shared by a whole model."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        t = Tensor.param(data)
        self.params[name] = t
        return t

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for k, t in self.params.items():
            if k not in state:
                raise ConfigError(f"checkpoint missing parameter {k!r}")
            if state[k].shape != t.data.shape:
                raise ConfigError(f"parameter {k!r} shape mismatch")
            t.data = state[k].astype(t.data.dtype)


class FeedForward:
    def __init__(self, params: ParamStore, name: str, d: int, hidden_mult: int = 4):
        self.fc1 = Linear(params, f"{name}.fc1", d, hidden_mult * d)
        self.fc2 = Linear(params, f"{name}.fc2", hidden_mult * d, d)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).gelu())


class CrossAttention:
    """Pre-projected multi-head attention with learned q/k/v/out maps."""

    def __init__(self, params: ParamStore, name: str, d_model: int, d_context: int,
                 heads: int):
        self.heads = heads
        self.q = Linear(params, f"{name}.q", d_model, d_model)
        self.k = Linear(params, f"{name}.k", d_context, d_model)
        self.v = Linear(params, f"{name}.v", d_context, d_model)
        self.out = Linear(params, f"{name}.out", d_model, d_model)

    def __call__(self, x: Tensor, context: Tensor) -> Tensor:
        return self.out(attention(self.q(x), self.k(context), self.v(context), self.heads))
