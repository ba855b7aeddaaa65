"""Instruction embedding from a learned fixed-vocabulary table.

Instructions are lowercased, stripped of punctuation and split on
whitespace.  Known words index straight into the table; unknown words land
in a reserved range of hash buckets so they still embed deterministically.
"""

from __future__ import annotations

import hashlib
import string

import numpy as np

from .autodiff import Tensor, gather_rows
from .nn import ParamStore


class InputError(ValueError):
    pass


DEFAULT_VOCAB = (
    "make", "it", "the", "a", "look", "turn", "into", "everything",
    "gold", "golden", "tint", "desaturate", "grayscale", "monochrome",
    "hue", "toward", "color", "colors",
    "red", "green", "blue", "yellow", "purple", "cyan", "orange", "white",
    "lift", "raise", "up", "upper", "top", "above", "float",
    "fade", "out", "hide", "left", "right", "half", "side", "lower",
    "scene", "object", "part",
)

_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_instruction(y: str) -> list[str]:
    words = y.lower().translate(_PUNCT).split()
    if not words:
        raise InputError("instruction contains no words")
    return words


def stable_hash(word: str) -> int:
    digest = hashlib.sha256(word.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class TextEmbedding:
    """Word-vector table with a reserved bucket range for unknown words."""

    def __init__(self, params: ParamStore, name: str, vocab, d_text: int,
                 buckets: int = 32):
        self.vocabulary = {w: i for i, w in enumerate(vocab)}
        self.buckets = buckets
        rows = len(self.vocabulary) + buckets
        table = params.rng.normal(0.0, 0.02, (rows, d_text)).astype(np.float32)
        self.table = params.add(f"{name}.table", table)

    def row(self, word: str) -> int:
        if word in self.vocabulary:
            return self.vocabulary[word]
        return len(self.vocabulary) + stable_hash(word) % self.buckets

    def __call__(self, y: str) -> Tensor:
        rows = np.array([self.row(w) for w in normalize_instruction(y)],
                        dtype=np.int64)
        return gather_rows(self.table, rows)
