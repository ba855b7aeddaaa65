import numpy as np
import pytest

from splatedit.autodiff import Tensor
from splatedit.camera import Camera, look_at, orbit_camera
from splatedit.gradcheck import grad_check
from splatedit.raster import (
    LOWPASS,
    ProjectedGaussian,
    RenderStateError,
    project_ewa,
    render,
    render_backward,
    render_bruteforce,
    render_graph,
    world_covariance,
)
from splatedit.scene import make_scene
from splatedit.synth import random_scene


def single_gaussian_scene(mu=(0.0, 0.0, 0.0), scale=(0.5, 0.5, 0.5),
                          opacity=0.8, color=(1.0, 0.0, 0.0),
                          rot=(1.0, 0.0, 0.0, 0.0)):
    return make_scene(mu=np.array([mu]), scale=np.array([scale]),
                      opacity=np.array([opacity]), color=np.array([color]),
                      rot=np.array([rot]))


def front_camera(width=17, height=17, distance=4.0):
    return look_at((0.0, 0.0, -distance), (0.0, 0.0, 0.0),
                   width=width, height=height)


class TestWorldCovariance:
    def test_identity(self):
        cov = world_covariance(np.ones(3), np.array([1.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(cov, np.eye(3), atol=1e-12)

    def test_axis_aligned_scaling(self):
        cov = world_covariance(np.array([2.0, 1.0, 1.0]),
                               np.array([1.0, 0.0, 0.0, 0.0]))
        np.testing.assert_allclose(cov, np.diag([4.0, 1.0, 1.0]), atol=1e-12)

    def test_quarter_turn_about_z_swaps_axes(self):
        s = np.sqrt(0.5)
        cov = world_covariance(np.array([2.0, 1.0, 1.0]),
                               np.array([s, 0.0, 0.0, s]))
        np.testing.assert_allclose(cov, np.diag([1.0, 4.0, 1.0]), atol=1e-12)

    def test_batched_matches_single(self):
        rng = np.random.default_rng(0)
        scale = rng.uniform(0.2, 2.0, size=(5, 3))
        rot = rng.normal(size=(5, 4))
        rot /= np.linalg.norm(rot, axis=1, keepdims=True)
        batched = world_covariance(scale, rot)
        for i in range(5):
            np.testing.assert_allclose(batched[i],
                                       world_covariance(scale[i], rot[i]),
                                       atol=1e-12)

    def test_symmetric_positive_definite(self):
        rng = np.random.default_rng(1)
        scale = rng.uniform(0.1, 3.0, size=(8, 3))
        rot = rng.normal(size=(8, 4))
        cov = world_covariance(scale, rot)
        np.testing.assert_allclose(cov, np.swapaxes(cov, -1, -2), atol=1e-12)
        assert (np.linalg.eigvalsh(cov) > 0).all()


class TestProjection:
    def test_behind_camera_culled(self):
        cam = front_camera()
        scene = single_gaussian_scene(mu=(0.0, 0.0, -10.0))
        assert project_ewa(scene, cam) == []

    def test_far_offscreen_culled(self):
        cam = front_camera()
        scene = single_gaussian_scene(mu=(500.0, 0.0, 0.0), scale=(0.1,) * 3)
        assert project_ewa(scene, cam) == []

    def test_on_axis_projection(self):
        d = 4.0
        sigma = 0.5
        cam = front_camera(distance=d)
        scene = single_gaussian_scene(scale=(sigma,) * 3)
        out = project_ewa(scene, cam)
        assert len(out) == 1
        pg = out[0]
        assert isinstance(pg, ProjectedGaussian)
        assert pg.index == 0
        assert pg.depth == pytest.approx(d)
        np.testing.assert_allclose(pg.mean2d, [cam.cx, cam.cy], atol=1e-9)
        expected = (cam.fx * sigma / d) ** 2 + LOWPASS
        np.testing.assert_allclose(
            pg.cov2d, np.diag([expected, (cam.fy * sigma / d) ** 2 + LOWPASS]),
            atol=1e-6)

    def test_mean2d_tracks_lateral_motion(self):
        d = 4.0
        cam = front_camera(distance=d)
        eps = 1e-4
        base = project_ewa(single_gaussian_scene(), cam)[0].mean2d
        moved = project_ewa(single_gaussian_scene(mu=(eps, 0.0, 0.0)), cam)[0].mean2d
        # camera looks along -z from behind the scene, so world +x maps to -u
        slope = (moved[0] - base[0]) / eps
        np.testing.assert_allclose(abs(slope), cam.fx / d, rtol=1e-4)
        assert moved[1] == pytest.approx(base[1], abs=1e-6)


class TestRenderForward:
    def test_empty_scene_is_background(self):
        cam = front_camera()
        scene = make_scene(mu=np.zeros((0, 3)), scale=np.ones((0, 3)),
                           opacity=np.zeros(0), color=np.zeros((0, 3)),
                           rot=np.tile([1.0, 0.0, 0.0, 0.0], (0, 1)))
        out = render(scene, cam, background=(0.2, 0.4, 0.6))
        np.testing.assert_allclose(out.image,
                                   np.broadcast_to([0.2, 0.4, 0.6], (17, 17, 3)),
                                   atol=1e-7)
        np.testing.assert_allclose(out.transmittance, 1.0)

    def test_single_gaussian_center_pixel(self):
        # width 17 puts the principal point on the center of pixel (8, 8)
        cam = front_camera(width=17, height=17)
        scene = single_gaussian_scene(opacity=0.8, color=(1.0, 0.0, 0.0))
        out = render(scene, cam, background=(0.0, 0.0, 0.0))
        np.testing.assert_allclose(out.image[8, 8], [0.8, 0.0, 0.0], atol=1e-5)
        assert out.transmittance[8, 8] == pytest.approx(0.2, abs=1e-5)

    def test_background_shows_through_transmittance(self):
        cam = front_camera()
        scene = single_gaussian_scene(opacity=0.5, color=(0.0, 1.0, 0.0))
        bg = np.array([1.0, 0.0, 0.0])
        out = render(scene, cam, background=bg)
        # center pixel: 0.5 * green + 0.5 * red background
        np.testing.assert_allclose(out.image[8, 8], [0.5, 0.5, 0.0], atol=1e-5)

    def test_opacity_clamped_at_099(self):
        cam = front_camera()
        scene = single_gaussian_scene(opacity=0.9999, color=(0.0, 0.0, 1.0))
        out = render(scene, cam)
        assert out.image[8, 8, 2] == pytest.approx(0.99, abs=1e-5)

    def test_front_to_back_ordering(self):
        cam = front_camera()
        mu = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])  # first is closer
        scene = make_scene(mu=mu, scale=np.full((2, 3), 0.8),
                           opacity=np.array([0.6, 0.6]),
                           color=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
                           rot=np.tile([1.0, 0.0, 0.0, 0.0], (2, 1)))
        out = render(scene, cam)
        px = out.image[8, 8]
        # near red contributes 0.6, far green only through the remaining 0.4
        assert px[0] == pytest.approx(0.6, abs=1e-3)
        assert px[1] == pytest.approx(0.4 * 0.6, abs=1e-3)

    def test_primitive_order_invariance(self):
        scene = random_scene(30, seed=7)
        cam = orbit_camera(25.0, 20.0, 4.0, width=32, height=32)
        perm = np.random.default_rng(0).permutation(scene.n)
        shuffled = make_scene(mu=scene.mu[perm], scale=scene.scale[perm],
                              opacity=scene.opacity[perm], color=scene.color[perm],
                              rot=scene.rot[perm])
        a = render(scene, cam).image
        b = render(shuffled, cam).image
        np.testing.assert_allclose(a, b, atol=1e-6)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_tile_renderer_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 51))
        scene = random_scene(n, seed=seed + 100)
        cam = orbit_camera(float(rng.uniform(0, 360)), float(rng.uniform(-40, 40)),
                           4.0, width=32, height=32)
        tiled = render(scene, cam, background=(0.1, 0.2, 0.3),
                       terminate=False).image
        brute = render_bruteforce(scene, cam, background=(0.1, 0.2, 0.3))
        assert np.abs(tiled - brute).max() <= 1e-5

    def test_odd_image_size_tiling(self):
        scene = random_scene(20, seed=11)
        cam = orbit_camera(10.0, 5.0, 4.0, width=37, height=23)
        tiled = render(scene, cam, terminate=False).image
        brute = render_bruteforce(scene, cam)
        assert np.abs(tiled - brute).max() <= 1e-5


class TestRenderBackward:
    def test_requires_records(self):
        cam = front_camera()
        out = render(single_gaussian_scene(), cam, retain_records=False)
        with pytest.raises(RenderStateError):
            render_backward(out, np.zeros((17, 17, 3)))

    def test_zero_grad_in_zero_grad_out(self):
        cam = front_camera()
        out = render(single_gaussian_scene(), cam)
        grads = render_backward(out, np.zeros((17, 17, 3), dtype=np.float32))
        for name in ("mu", "scale", "opacity", "color", "rot"):
            np.testing.assert_allclose(grads[name], 0.0)

    def test_color_gradient_is_blend_weight(self):
        cam = front_camera()
        out = render(single_gaussian_scene(opacity=0.8), cam)
        seed = np.zeros((17, 17, 3), dtype=np.float32)
        seed[8, 8, 0] = 1.0  # red channel of the center pixel
        grads = render_backward(out, seed)
        assert grads["color"][0, 0] == pytest.approx(0.8, abs=1e-5)
        assert grads["color"][0, 1] == 0.0
        assert grads["color"][0, 2] == 0.0

    def test_repeated_backward_is_stable(self):
        cam = front_camera()
        out = render(single_gaussian_scene(), cam)
        seed = np.ones((17, 17, 3), dtype=np.float32)
        first = render_backward(out, seed)
        second = render_backward(out, seed)
        for name in first:
            np.testing.assert_allclose(first[name], second[name])

    @staticmethod
    def _grad_scene():
        mu = np.array([[0.0, 0.0, 0.0], [0.4, -0.2, 0.3], [-0.3, 0.3, -0.2]])
        scale = np.array([[0.5, 0.4, 0.6], [0.3, 0.5, 0.4], [0.4, 0.3, 0.5]])
        opacity = np.array([0.7, 0.5, 0.6])
        color = np.array([[0.9, 0.2, 0.1], [0.1, 0.8, 0.3], [0.2, 0.3, 0.9]])
        rot = np.array([[1.0, 0.0, 0.0, 0.0],
                        [0.9, 0.1, -0.2, 0.1],
                        [0.8, -0.1, 0.3, 0.2]])
        rot /= np.linalg.norm(rot, axis=1, keepdims=True)
        return make_scene(mu=mu, scale=scale, opacity=opacity, color=color, rot=rot)

    @pytest.mark.parametrize("attr", ["mu", "scale", "opacity", "color", "rot"])
    def test_grad_check_against_finite_differences(self, attr):
        scene = self._grad_scene()
        cam = front_camera(width=16, height=16)
        wimg = np.random.default_rng(5).normal(size=(16, 16, 3))

        def loss(x):
            leaves = {name: Tensor(getattr(scene, name).astype(np.float64))
                      for name in ("mu", "scale", "opacity", "color", "rot")}
            leaves[attr] = x
            img, _ = render_graph(leaves["mu"], leaves["scale"], leaves["opacity"],
                                  leaves["color"], leaves["rot"], cam,
                                  terminate=False)
            return (img * Tensor(wimg)).sum()

        # small step keeps central differences from crossing the 1/255
        # contribution cutoff, which is a genuine discontinuity of the blend
        report = grad_check(loss, getattr(scene, attr).astype(np.float64),
                            step=1e-5)
        assert report.max_rel_err <= 1e-3, report.max_rel_err

    def test_whole_image_gradients_finite(self):
        scene = random_scene(25, seed=9)
        cam = orbit_camera(40.0, 10.0, 4.0, width=24, height=24)
        out = render(scene, cam)
        grads = render_backward(out, np.ones((24, 24, 3), dtype=np.float32))
        for name, g in grads.items():
            assert np.isfinite(g).all(), name
            assert g.shape == getattr(scene, name).shape
