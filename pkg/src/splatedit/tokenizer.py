"""Scene tokenization: anchor sampling, nearest-neighbor grouping, projection.

A scene of N primitives becomes a fixed set of n tokens.  Each token is one
anchor primitive plus its k-1 spatially nearest neighbors, their 14
attributes concatenated (neighbor positions anchor-relative, the anchor's own
position absolute) and mapped to d_model by a shared two-layer projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.spatial import cKDTree

from .autodiff import Tensor
from .nn import ConfigError, Linear, ParamStore
from .scene import GaussianScene

TOKEN_FEATURES = 14  # mu(3) + scale(3) + opacity(1) + color(3) + rot(4)

STRATEGIES = ("random", "farthest_point", "spatial_color_kmeans")


class EmptySceneError(ValueError):
    pass


@dataclass(frozen=True)
class TokenizerConfig:
    n: int = 32
    k: int = 16
    strategy: str = "random"
    seed: int = 0
    d_model: int = 128

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ConfigError("token count and group size must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown anchor strategy {self.strategy!r}")


@dataclass
class TokenBatch:
    raw_tokens: np.ndarray   # [n, k*f]
    anchors: np.ndarray      # [n] primitive indices
    groups: np.ndarray       # [n, k] primitive indices, row 0 is the anchor
    projected: Tensor        # [n, d_model]


def canonical_order(scene: GaussianScene) -> np.ndarray:
    """Storage indices sorted lexicographically by position.

    Randomness is seeded against this ordering so results do not depend on
    the order primitives happen to be stored in a file.
    """
    return np.lexsort((scene.mu[:, 2], scene.mu[:, 1], scene.mu[:, 0]))


def sample_anchors(scene: GaussianScene, config: TokenizerConfig) -> np.ndarray:
    if scene.n == 0:
        raise EmptySceneError("cannot sample anchors from an empty scene")
    order = canonical_order(scene)
    rng = np.random.default_rng(config.seed)
    n, big_n = config.n, scene.n

    if config.strategy == "random":
        if big_n >= n:
            picks = rng.choice(big_n, size=n, replace=False)
        else:
            picks = np.concatenate([np.arange(big_n),
                                    rng.integers(0, big_n, size=n - big_n)])
        return order[picks]

    if config.strategy == "farthest_point":
        mu = scene.mu[order].astype(np.float64)
        chosen = [int(rng.integers(big_n))]
        dist = np.linalg.norm(mu - mu[chosen[0]], axis=1)
        while len(chosen) < min(n, big_n):
            nxt = int(np.argmax(dist))
            chosen.append(nxt)
            dist = np.minimum(dist, np.linalg.norm(mu - mu[nxt], axis=1))
        while len(chosen) < n:
            chosen.append(chosen[len(chosen) % big_n])
        return order[np.asarray(chosen)]

    # spatial-color k-means, positions and colors equally weighted
    mu = scene.mu[order].astype(np.float64)
    span = mu.max(axis=0) - mu.min(axis=0)
    span[span < 1e-12] = 1.0
    feats = np.concatenate([0.5 * (mu - mu.min(axis=0)) / span,
                            0.5 * scene.color[order].astype(np.float64)], axis=1)
    n_eff = min(n, big_n)
    centroids, _ = kmeans2(feats, n_eff, seed=config.seed, minit="++")
    # each centroid claims its nearest still-unclaimed primitive
    d2 = ((feats[None, :, :] - centroids[:, None, :]) ** 2).sum(axis=2)
    picks = np.full(n_eff, -1, dtype=np.int64)
    taken = np.zeros(big_n, dtype=bool)
    for c in range(n_eff):
        row = d2[c].copy()
        row[taken] = np.inf
        picks[c] = int(np.argmin(row))
        taken[picks[c]] = True
    if n > big_n:
        picks = np.concatenate([picks, picks[rng.integers(0, n_eff, size=n - big_n)]])
    return order[picks]


def group_knn(scene: GaussianScene, anchors: np.ndarray, k: int) -> np.ndarray:
    """For each anchor, itself plus its k-1 nearest other primitives.

    Distance is Euclidean on position; equal distances break toward the
    lower primitive index.  Short scenes pad groups by repeating the anchor.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    n = anchors.size
    groups = np.empty((n, k), dtype=np.int64)
    groups[:, 0] = anchors
    if k == 1:
        return groups
    tree = cKDTree(scene.mu)
    query_k = min(k + 1, scene.n)  # the anchor itself comes back as a hit
    dist, idx = tree.query(scene.mu[anchors], k=query_k)
    if query_k == 1:
        dist, idx = dist[:, None], idx[:, None]
    for row in range(n):
        mask = idx[row] != anchors[row]
        cand_i = idx[row][mask]
        cand_d = dist[row][mask]
        sort = np.lexsort((cand_i, cand_d))
        picked = cand_i[sort][:k - 1]
        if picked.size < k - 1:
            picked = np.concatenate([picked, np.full(k - 1 - picked.size,
                                                     anchors[row], dtype=np.int64)])
        groups[row, 1:] = picked
    return groups


class TokenProjection:
    """Shared two-layer map from raw token width k*f to d_model."""

    def __init__(self, params: ParamStore, name: str, k: int, d_model: int):
        width = k * TOKEN_FEATURES
        self.width = width
        self.fc1 = Linear(params, f"{name}.fc1", width, d_model)
        self.fc2 = Linear(params, f"{name}.fc2", d_model, d_model)

    def __call__(self, raw: Tensor) -> Tensor:
        return self.fc2(self.fc1(raw).gelu())


def raw_token_array(scene: GaussianScene, groups: np.ndarray) -> np.ndarray:
    """[n, k*f] attribute concatenation, neighbor positions anchor-relative."""
    n, k = groups.shape
    attrs = scene.attributes().astype(np.float32)  # [N, 14]
    member = attrs[groups.reshape(-1)].reshape(n, k, TOKEN_FEATURES)
    anchor_mu = scene.mu[groups[:, 0]].astype(np.float32)
    member[:, 1:, 0:3] -= anchor_mu[:, None, :]
    return member.reshape(n, k * TOKEN_FEATURES)


def assemble_tokens(scene: GaussianScene, groups: np.ndarray,
                    projection: TokenProjection) -> TokenBatch:
    raw = raw_token_array(scene, groups)
    if raw.shape[1] != projection.width:
        raise ConfigError(
            f"raw token width {raw.shape[1]} does not match projection "
            f"input width {projection.width}")
    projected = projection(Tensor(raw))
    return TokenBatch(raw_tokens=raw, anchors=groups[:, 0].copy(),
                      groups=groups, projected=projected)


def tokenize(scene: GaussianScene, config: TokenizerConfig,
             projection: TokenProjection) -> TokenBatch:
    anchors = sample_anchors(scene, config)
    groups = group_knn(scene, anchors, config.k)
    return assemble_tokens(scene, groups, projection)
