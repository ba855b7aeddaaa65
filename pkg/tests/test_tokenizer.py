import numpy as np
import pytest
from scipy.stats import chisquare

from splatedit.nn import ConfigError, ParamStore
from splatedit.scene import make_scene
from splatedit.synth import random_scene
from splatedit.tokenizer import (
    EmptySceneError,
    TOKEN_FEATURES,
    TokenProjection,
    TokenizerConfig,
    assemble_tokens,
    group_knn,
    raw_token_array,
    sample_anchors,
    tokenize,
)


def line_scene(xs):
    n = len(xs)
    mu = np.zeros((n, 3))
    mu[:, 0] = xs
    return make_scene(mu=mu, scale=np.full((n, 3), 0.1),
                      opacity=np.full(n, 0.5),
                      color=np.full((n, 3), 0.5),
                      rot=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)))


class TestSampleAnchors:
    def test_empty_scene_rejected(self):
        scene = random_scene(0, seed=0)
        with pytest.raises(EmptySceneError):
            sample_anchors(scene, TokenizerConfig(n=4, k=2))

    def test_random_exhausts_when_counts_match(self):
        scene = random_scene(16, seed=1)
        anchors = sample_anchors(scene, TokenizerConfig(n=16, k=2, seed=3))
        assert sorted(anchors) == list(range(16))

    def test_random_distinct_when_scene_large_enough(self):
        scene = random_scene(64, seed=2)
        anchors = sample_anchors(scene, TokenizerConfig(n=8, k=2, seed=5))
        assert len(set(anchors.tolist())) == 8

    def test_random_fills_small_scene_with_replacement(self):
        scene = random_scene(3, seed=3)
        anchors = sample_anchors(scene, TokenizerConfig(n=8, k=2, seed=0))
        assert anchors.shape == (8,)
        assert set(anchors.tolist()) <= {0, 1, 2}

    def test_fps_extremes_on_collinear_points(self):
        scene = line_scene([0.0, 1.0, 2.0, 5.0])
        # find a seed whose first draw starts the greedy walk at an endpoint
        for seed in range(64):
            if int(np.random.default_rng(seed).integers(4)) == 0:
                break
        cfg = TokenizerConfig(n=2, k=2, strategy="farthest_point", seed=seed)
        anchors = sample_anchors(scene, cfg)
        assert set(anchors.tolist()) == {0, 3}

    def test_fps_spreads_over_clusters(self):
        mu = np.concatenate([np.random.default_rng(0).normal(0, 0.1, (20, 3)),
                             np.random.default_rng(1).normal(10, 0.1, (20, 3))])
        scene = make_scene(mu=mu, scale=np.full((40, 3), 0.1),
                           opacity=np.full(40, 0.5), color=np.full((40, 3), 0.5),
                           rot=np.tile([1.0, 0.0, 0.0, 0.0], (40, 1)))
        cfg = TokenizerConfig(n=2, k=2, strategy="farthest_point", seed=0)
        anchors = sample_anchors(scene, cfg)
        sides = {int(a) // 20 for a in anchors}
        assert sides == {0, 1}

    def test_kmeans_degenerate_is_identity(self):
        scene = random_scene(8, seed=4)
        cfg = TokenizerConfig(n=8, k=2, strategy="spatial_color_kmeans", seed=1)
        anchors = sample_anchors(scene, cfg)
        assert sorted(anchors.tolist()) == list(range(8))

    def test_kmeans_anchors_distinct(self):
        scene = random_scene(100, seed=5)
        cfg = TokenizerConfig(n=16, k=2, strategy="spatial_color_kmeans", seed=2)
        anchors = sample_anchors(scene, cfg)
        assert len(set(anchors.tolist())) == 16

    def test_random_uniformity_chi_square(self):
        scene = random_scene(64, seed=6)
        counts = np.zeros(64)
        for trial in range(10_000):
            cfg = TokenizerConfig(n=8, k=2, seed=trial)
            np.add.at(counts, sample_anchors(scene, cfg), 1)
        assert chisquare(counts).pvalue > 0.01

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ConfigError):
            TokenizerConfig(n=4, k=2, strategy="mystery")


class TestGroupKnn:
    def test_forced_line_group(self):
        scene = line_scene([0.0, 1.0, 2.0, 5.0])
        groups = group_knn(scene, np.array([0]), k=3)
        np.testing.assert_array_equal(groups, [[0, 1, 2]])

    def test_k1_is_anchor_only(self):
        scene = random_scene(10, seed=7)
        anchors = np.array([3, 7, 1])
        groups = group_knn(scene, anchors, k=1)
        np.testing.assert_array_equal(groups, anchors[:, None])

    def test_padding_on_small_scene(self):
        scene = line_scene([0.0, 1.0])
        groups = group_knn(scene, np.array([1]), k=4)
        np.testing.assert_array_equal(groups, [[1, 0, 1, 1]])

    def test_matches_exhaustive_sort_oracle(self):
        scene = random_scene(500, seed=8)
        anchors = sample_anchors(scene, TokenizerConfig(n=8, k=16, seed=9))
        groups = group_knn(scene, anchors, k=16)
        d2 = ((scene.mu[:, None, :] - scene.mu[None, :, :]) ** 2).sum(axis=2)
        for row, a in enumerate(anchors):
            order = np.lexsort((np.arange(500), d2[a]))
            expected = [int(a)] + [i for i in order if i != a][:15]
            assert groups[row].tolist() == expected

    def test_tie_break_prefers_lower_index(self):
        scene = line_scene([0.0, 1.0, -1.0, 2.0])  # 1 and 2 equidistant from 0
        groups = group_knn(scene, np.array([0]), k=2)
        np.testing.assert_array_equal(groups, [[0, 1]])


class TestAssembleTokens:
    def test_raw_width_and_relative_coordinates(self):
        scene = random_scene(40, seed=10)
        anchors = sample_anchors(scene, TokenizerConfig(n=4, k=8, seed=0))
        groups = group_knn(scene, anchors, k=8)
        raw = raw_token_array(scene, groups)
        assert raw.shape == (4, 8 * TOKEN_FEATURES)
        first = raw[0].reshape(8, TOKEN_FEATURES)
        np.testing.assert_allclose(first[0, :3], scene.mu[groups[0, 0]])
        np.testing.assert_allclose(
            first[1, :3], scene.mu[groups[0, 1]] - scene.mu[groups[0, 0]],
            atol=1e-6)

    def test_translation_changes_only_anchor_channels(self):
        scene = random_scene(40, seed=11)
        shift = np.array([2.5, -1.0, 0.75], dtype=np.float32)
        moved = make_scene(mu=scene.mu + shift, scale=scene.scale,
                           opacity=scene.opacity, color=scene.color, rot=scene.rot)
        anchors = sample_anchors(scene, TokenizerConfig(n=4, k=8, seed=1))
        groups = group_knn(scene, anchors, k=8)
        raw_a = raw_token_array(scene, groups).reshape(4, 8, TOKEN_FEATURES)
        raw_b = raw_token_array(moved, groups).reshape(4, 8, TOKEN_FEATURES)
        np.testing.assert_allclose(raw_b[:, 0, :3] - raw_a[:, 0, :3],
                                   np.broadcast_to(shift, (4, 3)), atol=1e-5)
        np.testing.assert_allclose(raw_b[:, 1:], raw_a[:, 1:], atol=1e-5)

    def test_projection_width_mismatch_rejected(self):
        scene = random_scene(20, seed=12)
        groups = group_knn(scene, np.array([0, 1]), k=4)
        params = ParamStore(seed=0)
        proj = TokenProjection(params, "proj", k=8, d_model=16)
        with pytest.raises(ConfigError):
            assemble_tokens(scene, groups, proj)

    def test_projected_shape_and_determinism(self):
        scene = random_scene(30, seed=13)
        cfg = TokenizerConfig(n=6, k=4, seed=2, d_model=32)
        outs = []
        for _ in range(2):
            params = ParamStore(seed=7)
            proj = TokenProjection(params, "proj", k=cfg.k, d_model=cfg.d_model)
            batch = tokenize(scene, cfg, proj)
            assert batch.projected.shape == (6, 32)
            assert batch.groups.shape == (6, 4)
            np.testing.assert_array_equal(batch.anchors, batch.groups[:, 0])
            outs.append(batch.projected.data)
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_projection_is_differentiable(self):
        scene = random_scene(30, seed=14)
        cfg = TokenizerConfig(n=6, k=4, seed=2, d_model=32)
        params = ParamStore(seed=7)
        proj = TokenProjection(params, "proj", k=cfg.k, d_model=cfg.d_model)
        batch = tokenize(scene, cfg, proj)
        batch.projected.sum().backward()
        grads = [params.params[name].grad for name in params.params]
        assert any(g is not None and np.abs(g).max() > 0 for g in grads)

    def test_storage_order_only_relabels_groups(self):
        scene = random_scene(50, seed=15)
        perm = np.random.default_rng(3).permutation(50)
        shuffled = make_scene(mu=scene.mu[perm], scale=scene.scale[perm],
                              opacity=scene.opacity[perm], color=scene.color[perm],
                              rot=scene.rot[perm])
        cfg = TokenizerConfig(n=8, k=6, seed=4)
        ga = group_knn(scene, sample_anchors(scene, cfg), cfg.k)
        gb = group_knn(shuffled, sample_anchors(shuffled, cfg), cfg.k)
        geo_a = {tuple(map(tuple, np.round(scene.mu[row], 5))) for row in ga}
        geo_b = {tuple(map(tuple, np.round(shuffled.mu[row], 5))) for row in gb}
        assert geo_a == geo_b
