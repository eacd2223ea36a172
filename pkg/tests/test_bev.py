import numpy as np
import pytest

from sts.bev import FrustumPoints, GridConfig, bev_norm, lift, splat
from sts.errors import DomainError, ShapeError
from sts.geometry import CameraModel, camera_mount_rotation
from sts.hypotheses import make_sid
from sts.tensors import DepthDistribution, FeatureMap

from conftest import make_camera


def unit_camera(R=np.eye(3)):
    K = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]])
    return CameraModel(K, 1, 1, R, np.zeros(3), "U")


def point(xyz, prob=1.0, feat=(1.0,)):
    return FrustumPoints(np.array([xyz], float), np.array([prob]), np.array([0]), np.array([0]),
                         np.array(feat, float).reshape(-1, 1))


def test_principal_pixel_lifts_onto_axis():
    bins = make_sid(count=4)
    p = np.zeros((4, 1, 1))
    p[2] = 1.0
    feats = FeatureMap(np.ones((2, 1, 1)), 1, "U")
    fr = lift(feats, DepthDistribution(p, bins), unit_camera(), min_prob=0.5)
    np.testing.assert_allclose(fr.points, [[0.0, 0.0, bins.centers[2]]], atol=1e-12)
    fr = lift(feats, DepthDistribution(p, bins), unit_camera(camera_mount_rotation(0.0)), min_prob=0.5)
    np.testing.assert_allclose(fr.points, [[bins.centers[2], 0.0, 0.0]], atol=1e-12)


def test_one_hot_gives_one_point_per_pixel(rng):
    cam = make_camera(width=64, height=32)
    bins = make_sid(count=8)
    k = rng.integers(0, 8, (8, 16))
    p = np.zeros((8, 8, 16))
    p[k, np.arange(8)[:, None], np.arange(16)] = 1.0
    fr = lift(FeatureMap(rng.standard_normal((3, 8, 16)), 4, "CAM"), DepthDistribution(p, bins), cam)
    assert len(fr.probs) == 128
    np.testing.assert_array_equal(fr.bin, k.reshape(-1)[fr.pixel])


def test_uniform_spreads_feature(rng):
    cam = make_camera(width=64, height=32)
    bins = make_sid(count=8)
    feats = FeatureMap(rng.standard_normal((3, 8, 16)), 4, "CAM")
    fr = lift(feats, DepthDistribution(np.full((8, 8, 16), 1 / 8), bins), cam)
    assert len(fr.probs) == 8 * 128
    w = fr.weights[:, fr.pixel == 5]
    np.testing.assert_allclose(w, np.repeat(feats.data.reshape(3, -1)[:, [5]] / 8, 8, axis=1))


def test_lift_shape_checks():
    cam = make_camera(width=64, height=32)
    with pytest.raises(ShapeError):
        lift(FeatureMap(np.zeros((3, 8, 16)), 4, "CAM"), DepthDistribution(np.ones((4, 8, 15)), make_sid(count=4)), cam)


def test_single_point_lands_in_its_cell():
    cfg = GridConfig(-4.0, 4.0, -4.0, 4.0, 1.0)
    grid = splat(point((1.2, -0.3, 5.0), 0.5, (2.0, 4.0)), cfg)
    assert grid.data.shape == (2, 8, 8)
    np.testing.assert_allclose(grid.data[:, 5, 3], [1.0, 2.0])
    assert np.count_nonzero(grid.data) == 2


def test_points_in_one_cell_add():
    cfg = GridConfig(-4.0, 4.0, -4.0, 4.0, 1.0)
    grid = splat([point((0.1, 0.1, 0.0), 1.0, (1.0,)), point((0.9, 0.4, 9.0), 1.0, (2.0,))], cfg)
    assert grid.data[0, 4, 4] == 3.0


def test_points_outside_are_dropped():
    cfg = GridConfig(-4.0, 4.0, -4.0, 4.0, 1.0)
    assert not splat(point((4.0, 0.0, 0.0)), cfg).data.any()


def random_frustum(rng, n=500, extent=10.0):
    return FrustumPoints(rng.uniform(-extent, extent, (n, 3)), rng.uniform(0, 1, n), rng.integers(0, 40, n),
                         rng.integers(0, 16, n), rng.standard_normal((4, 40)))


def test_mass_conservation(rng):
    fr = random_frustum(rng)
    grid = splat(fr, GridConfig(-12.0, 12.0, -12.0, 12.0, 0.8))
    np.testing.assert_allclose(grid.data.sum(axis=(1, 2)), fr.weights.sum(axis=1), rtol=1e-9, atol=1e-12)


def test_translation_equivariance(rng):
    cfg = GridConfig(-16.0, 16.0, -16.0, 16.0, 0.8)
    fr = random_frustum(rng)
    fr.points[:, :2] = np.round(fr.points[:, :2] / 0.8) * 0.8 + 0.4  # cell centers
    moved = FrustumPoints(fr.points + [0.8 * 3, -0.8 * 2, 0.0], fr.probs, fr.pixel, fr.bin, fr.features)
    a, b = splat(fr, cfg).data, splat(moved, cfg).data
    np.testing.assert_allclose(b[:, 3 + 1:40 - 3, 0:40 - 2 - 5], a[:, 1:40 - 6, 2:40 - 5], atol=1e-12)


def test_order_independent(rng):
    fr = random_frustum(rng)
    perm = rng.permutation(len(fr.probs))
    shuffled = FrustumPoints(fr.points[perm], fr.probs[perm], fr.pixel[perm], fr.bin[perm], fr.features)
    cfg = GridConfig(-12.0, 12.0, -12.0, 12.0, 0.8)
    np.testing.assert_array_equal(splat(fr, cfg).data, splat(shuffled, cfg).data)


def test_bev_norm():
    cfg = GridConfig(-1.0, 1.0, -1.0, 1.0, 1.0)
    grid = splat(point((0.5, 0.5, 0.0), 1.0, (3.0, 4.0)), cfg)
    assert bev_norm(grid)[1, 1] == 5.0


def test_grid_must_tile():
    with pytest.raises(DomainError):
        GridConfig(-1.0, 1.0, -1.0, 1.0, 0.3)
