"""The variation predictor: field generation module M and decoders F1/F2.

Tokens from the tokenizer are concatenated with per-token noise chunks on
the feature axis and refined by transformer blocks that cross-attend to the
instruction embedding (the latent variation field).  Per-primitive decoders
then read the field through cross-attention and emit attribute deltas via
terminal linear layers that start at exactly zero, so a fresh model is the
identity edit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, concat
from .nn import ConfigError, CrossAttention, FeedForward, LayerNorm, Linear, ParamStore
from .noise import materialize_noise
from .scene import GaussianScene, Variation
from .text import DEFAULT_VOCAB, TextEmbedding
from .tokenizer import (
    TOKEN_FEATURES,
    TokenBatch,
    TokenProjection,
    TokenizerConfig,
    tokenize,
)

CHECKPOINT_MAGIC = b"SPLW"
CHECKPOINT_VERSION = 1

MODES = ("iterative", "direct")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class PredictorConfig:
    n: int = 32
    k: int = 16
    d_model: int = 128
    d_text: int = 32
    d_eps: int = 16
    m_blocks: int = 4
    m_heads: int = 4
    f_blocks: int = 2
    f_heads: int = 1
    d_f: int = 64
    strategy: str = "random"
    tokenizer_seed: int = 0
    buckets: int = 32

    def tokenizer_config(self) -> TokenizerConfig:
        return TokenizerConfig(n=self.n, k=self.k, strategy=self.strategy,
                               seed=self.tokenizer_seed, d_model=self.d_model)


class FieldBlock:
    """One M block: self-attention, instruction cross-attention, feed-forward."""

    def __init__(self, params: ParamStore, name: str, d_model: int,
                 d_text: int, heads: int):
        self.ln1 = LayerNorm(params, f"{name}.ln1", d_model)
        self.self_attn = CrossAttention(params, f"{name}.self", d_model, d_model, heads)
        self.ln2 = LayerNorm(params, f"{name}.ln2", d_model)
        self.text_attn = CrossAttention(params, f"{name}.text", d_model, d_text, heads)
        self.ln3 = LayerNorm(params, f"{name}.ln3", d_model)
        self.ff = FeedForward(params, f"{name}.ff", d_model)

    def __call__(self, x: Tensor, instr: Tensor) -> Tensor:
        h = self.ln1(x)
        x = x + self.self_attn(h, h)
        x = x + self.text_attn(self.ln2(x), instr)
        return x + self.ff(self.ln3(x))


class Decoder:
    """Per-primitive decoder: attributes query the field, no self-attention."""

    def __init__(self, params: ParamStore, name: str, d_f: int, d_field: int,
                 blocks: int, heads: int, d_out: int):
        self.query = Linear(params, f"{name}.query", TOKEN_FEATURES, d_f)
        self.blocks = []
        for i in range(blocks):
            ln_a = LayerNorm(params, f"{name}.block{i}.ln_a", d_f)
            attn = CrossAttention(params, f"{name}.block{i}.attn", d_f, d_field, heads)
            ln_b = LayerNorm(params, f"{name}.block{i}.ln_b", d_f)
            ff = FeedForward(params, f"{name}.block{i}.ff", d_f)
            self.blocks.append((ln_a, attn, ln_b, ff))
        self.head = Linear(params, f"{name}.head", d_f, d_out, zero_init=True)

    def __call__(self, attrs: Tensor, field: Tensor) -> Tensor:
        x = self.query(attrs)
        for ln_a, attn, ln_b, ff in self.blocks:
            x = x + attn(ln_a(x), field)
            x = x + ff(ln_b(x))
        return self.head(x)


class VariationPredictor:
    def __init__(self, config: PredictorConfig = PredictorConfig(),
                 vocab=DEFAULT_VOCAB, init_seed: int = 0):
        self.config = config
        self.vocab = list(vocab)
        self.params = ParamStore(seed=init_seed)
        c = config
        self.projection = TokenProjection(self.params, "tokenizer", c.k, c.d_model)
        self.text = TextEmbedding(self.params, "text", self.vocab, c.d_text, c.buckets)
        self.m_input = Linear(self.params, "m.input", c.d_model + c.d_eps, c.d_model)
        self.m_blocks = [FieldBlock(self.params, f"m.block{i}", c.d_model,
                                    c.d_text, c.m_heads)
                         for i in range(c.m_blocks)]
        self.f1 = Decoder(self.params, "f1", c.d_f, c.d_model,
                          c.f_blocks, c.f_heads, d_out=3)
        self.f2 = Decoder(self.params, "f2", c.d_f, c.d_model,
                          c.f_blocks, c.f_heads, d_out=11)
        self.f_direct = Decoder(self.params, "f_direct", c.d_f, c.d_model,
                                c.f_blocks, c.f_heads, d_out=14)

    def embed_instruction(self, y: str) -> Tensor:
        return self.text(y)

    def generate_field(self, tokens: TokenBatch, eps: np.ndarray,
                       instr: Tensor) -> Tensor:
        c = self.config
        if tokens.projected.shape != (c.n, c.d_model):
            raise ConfigError(
                f"token batch shape {tokens.projected.shape} does not match "
                f"config ({c.n}, {c.d_model})")
        eps = np.asarray(eps, dtype=np.float32)
        if eps.shape != (c.n, c.d_eps):
            raise ConfigError(
                f"noise shape {eps.shape} does not match config ({c.n}, {c.d_eps})")
        x = self.m_input(concat([tokens.projected, Tensor(eps)], axis=1))
        for block in self.m_blocks:
            x = block(x, instr)
        return x

    def decode_mu(self, attrs: Tensor, field: Tensor) -> Tensor:
        return self.f1(attrs, field)

    def decode_rest(self, attrs_with_mu: Tensor, field: Tensor):
        out = self.f2(attrs_with_mu, field)
        return out[:, 0:3], out[:, 3], out[:, 4:7], out[:, 7:11]

    def predict_tensors(self, scene: GaussianScene, y: str, seed: int,
                        mode: str = "iterative") -> dict:
        """Differentiable prediction; returns delta Tensors keyed by field."""
        if mode not in MODES:
            raise ConfigError(f"unknown prediction mode {mode!r}")
        tokens = tokenize(scene, self.config.tokenizer_config(), self.projection)
        eps = materialize_noise(seed, (self.config.n, self.config.d_eps))
        field = self.generate_field(tokens, eps, self.embed_instruction(y))
        attrs = Tensor(scene.attributes())
        if mode == "direct":
            out = self.f_direct(attrs, field)
            return {"delta_mu": out[:, 0:3], "delta_scale": out[:, 3:6],
                    "delta_opacity": out[:, 6], "delta_color": out[:, 7:10],
                    "delta_rot": out[:, 10:14]}
        d_mu = self.decode_mu(attrs, field)
        rest = attrs[:, 3:]
        attrs2 = concat([attrs[:, 0:3] + d_mu, rest], axis=1)
        d_scale, d_opacity, d_color, d_rot = self.decode_rest(attrs2, field)
        return {"delta_mu": d_mu, "delta_scale": d_scale,
                "delta_opacity": d_opacity, "delta_color": d_color,
                "delta_rot": d_rot}

    def predict(self, scene: GaussianScene, y: str, seed: int,
                mode: str = "iterative") -> Variation:
        deltas = self.predict_tensors(scene, y, seed, mode)
        return Variation(*[deltas[f].data.astype(np.float32)
                           for f in Variation.FIELDS],
                         scene_id=scene.scene_id)


def save_weights(predictor: VariationPredictor, path):
    meta = {"config": asdict(predictor.config), "vocab": predictor.vocab}
    blob = json.dumps(meta).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        state = predictor.params.state()
        fh.write(struct.pack("<I", len(state)))
        for name, data in state.items():
            encoded = name.encode("utf-8")
            arr = np.ascontiguousarray(data, dtype=np.float32)
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_weights(path) -> VariationPredictor:
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise CheckpointError("not a predictor checkpoint")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        meta = json.loads(fh.read(blob_len).decode("utf-8"))
        predictor = VariationPredictor(PredictorConfig(**meta["config"]),
                                       vocab=meta["vocab"])
        count, = struct.unpack("<I", fh.read(4))
        state = {}
        for _ in range(count):
            name_len, = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            ndim, = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            data = np.frombuffer(fh.read(4 * int(np.prod(shape, dtype=np.int64))),
                                 dtype="<f4").reshape(shape)
            state[name] = data.copy()
    predictor.params.load_state(state)
    return predictor
