import numpy as np
import pytest

from splatedit.camera import orbit_camera
from splatedit.images import png_bytes
from splatedit.scene import make_scene, zero_variation
from splatedit.synth import blob_scene
from splatedit.viz import (
    VizConfig,
    direction_color,
    flatten_layer,
    project_points,
    viz_color,
    viz_panel,
    viz_position,
    viz_rotation,
    viz_scalar,
)

CAM = orbit_camera(25.0, 20.0, 4.0, width=48, height=48)
CFG = VizConfig(camera=CAM, radius=2)


@pytest.fixture()
def scene():
    return blob_scene(40, seed=11)


@pytest.fixture()
def sparse_scene():
    """Three primitives far enough apart that their circles never overlap."""
    mu = np.array([[-0.8, 0.0, 0.0], [0.0, 0.0, 0.0], [0.8, 0.0, 0.0]])
    n = 3
    return make_scene(mu, np.full((n, 3), 0.1), np.full(n, 0.8),
                      np.full((n, 3), 0.5),
                      np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)))


def test_radius_validated():
    with pytest.raises(ValueError):
        VizConfig(camera=CAM, radius=0)


def test_mismatched_variation_rejected(scene):
    other = zero_variation(blob_scene(10, seed=0))
    with pytest.raises(ValueError):
        viz_position(scene, other, CFG)


class TestDirectionColor:
    def test_pure_axes_map_to_primaries(self):
        pal = CFG.palette_directions
        np.testing.assert_allclose(direction_color(np.array([1.0, 0.0]), pal),
                                   [1, 0, 0], atol=1e-12)
        green = direction_color(np.array([np.cos(np.radians(120)),
                                          np.sin(np.radians(120))]), pal)
        np.testing.assert_allclose(green, [0, 1, 0], atol=1e-12)

    def test_zero_direction_is_black(self):
        assert direction_color(np.zeros(2), CFG.palette_directions).sum() == 0.0


class TestPosition:
    def test_zero_variation_is_transparent(self, scene):
        layer = viz_position(scene, zero_variation(scene), CFG)
        assert layer.shape == (48, 48, 4)
        assert layer.sum() == 0.0

    def test_segment_endpoints_near_projected_centers(self, scene):
        v = zero_variation(scene)
        v.delta_mu[:] = 0.0
        v.delta_mu[0] = [0.3, 0.0, 0.0]
        layer = viz_position(scene, v, CFG)
        before = project_points(scene.mu, CAM)[0]
        after = project_points(scene.mu + v.delta_mu, CAM)[0]
        painted = np.argwhere(layer[:, :, 3] > 0)[:, ::-1] + 0.5  # (x, y)
        assert painted.size > 0
        for endpoint in (before, after):
            nearest = np.abs(painted - endpoint).max(axis=1).min()
            assert nearest <= 1.0

    def test_opacity_scales_with_magnitude(self, scene):
        v = zero_variation(scene)
        v.delta_mu[:, 0] = 0.01
        v.delta_mu[0, 0] = 0.5
        layer = viz_position(scene, v, CFG)
        big = project_points(scene.mu, CAM)[0]
        x, y = int(big[0]), int(big[1])
        assert layer[y, x, 3] == pytest.approx(1.0)


class TestScalar:
    def test_sign_colors(self, sparse_scene):
        scene = sparse_scene
        v = zero_variation(scene)
        v.delta_opacity[0] = 0.4
        v.delta_opacity[1] = -0.4
        layer = viz_scalar(scene, v, "opacity", CFG)
        centers = project_points(scene.mu, CAM).astype(int)
        up = layer[centers[0, 1], centers[0, 0]]
        down = layer[centers[1, 1], centers[1, 0]]
        assert up[0] > up[2]    # positive change leans red
        assert down[2] > down[0]  # negative change leans blue

    def test_small_changes_near_white(self, scene):
        v = zero_variation(scene)
        v.delta_opacity[:] = 0.001
        v.delta_opacity[0] = 1.0
        layer = viz_scalar(scene, v, "opacity", CFG)
        centers = project_points(scene.mu, CAM).astype(int)
        tiny = layer[centers[5, 1], centers[5, 0], :3]
        np.testing.assert_allclose(tiny, [1, 1, 1], atol=1e-9)

    def test_scale_averages_axes(self, sparse_scene):
        scene = sparse_scene
        v = zero_variation(scene)
        v.delta_scale[0] = [0.3, -0.3, 0.0]  # averages to zero
        v.delta_scale[1] = [0.3, 0.3, 0.3]
        layer = viz_scalar(scene, v, "scale", CFG)
        centers = project_points(scene.mu, CAM).astype(int)
        np.testing.assert_allclose(layer[centers[0, 1], centers[0, 0], :3],
                                   [1, 1, 1], atol=1e-9)
        grown = layer[centers[1, 1], centers[1, 0]]
        assert grown[0] > grown[2]

    def test_unknown_attribute(self, scene):
        with pytest.raises(ValueError):
            viz_scalar(scene, zero_variation(scene), "color", CFG)


class TestColor:
    def test_zero_delta_fully_transparent(self, scene):
        layer = viz_color(scene, zero_variation(scene), CFG)
        assert layer.sum() == 0.0

    def test_affine_remap(self, scene):
        v = zero_variation(scene)
        v.delta_color[0] = [0.4, 0.0, -0.4]
        layer = viz_color(scene, v, CFG)
        c = project_points(scene.mu, CAM).astype(int)[0]
        np.testing.assert_allclose(layer[c[1], c[0], :3], [1.0, 0.5, 0.0],
                                   atol=1e-6)
        assert layer[c[1], c[0], 3] == pytest.approx(1.0)


class TestRotation:
    def test_zero_delta_fully_transparent(self, scene):
        layer = viz_rotation(scene, zero_variation(scene), CFG)
        assert layer.sum() == 0.0

    def test_w_drives_opacity_xyz_drives_color(self, scene):
        v = zero_variation(scene)
        v.delta_rot[0] = [0.2, 0.1, 0.0, -0.1]
        v.delta_rot[1] = [0.1, -0.1, 0.0, 0.1]
        layer = viz_rotation(scene, v, CFG)
        centers = project_points(scene.mu, CAM).astype(int)
        strong = layer[centers[0, 1], centers[0, 0]]
        weak = layer[centers[1, 1], centers[1, 0]]
        assert strong[3] == pytest.approx(1.0)
        assert weak[3] == pytest.approx(0.5)
        np.testing.assert_allclose(strong[:3], [1.0, 0.5, 0.0], atol=1e-6)


class TestPanel:
    def test_layout_and_determinism(self, scene):
        v = zero_variation(scene)
        v.delta_color[:] = 0.1
        v.delta_mu[:, 1] = 0.05
        panel = viz_panel(scene, v, CFG)
        assert panel.shape == (96, 144, 3)
        assert png_bytes(panel) == png_bytes(viz_panel(scene, v, CFG))

    def test_flatten_uses_background(self):
        layer = np.zeros((4, 4, 4))
        layer[0, 0] = [1.0, 0.0, 0.0, 0.5]
        flat = flatten_layer(layer, background=1.0)
        np.testing.assert_allclose(flat[0, 0], [1.0, 0.5, 0.5])
        np.testing.assert_allclose(flat[1, 1], [1.0, 1.0, 1.0])
