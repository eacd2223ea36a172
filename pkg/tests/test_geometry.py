import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sts.errors import DomainError, InvalidPoseError
from sts.geometry import (
    CameraModel,
    EgoPose,
    backproject,
    camera_mount_rotation,
    compose_relative_pose,
    pixel_centers,
    plane_homography,
    project_point_oracle,
    sample_positions,
)
from sts.hypotheses import DepthHypothesisSet, make_sid

from conftest import ego_at, make_camera, random_camera, random_ego


def chained_relative_pose(src_cam, src_ego, ref_cam, ref_ego):
    """Independent 4x4 chain cam_ref -> ego_t -> world -> ego_{t-1} -> cam_src."""
    def h(R, t):
        T = np.eye(4)
        T[:3, :3], T[:3, 3] = R, t
        return T
    T = (np.linalg.inv(h(src_cam.cam_to_ego_rotation, src_cam.cam_to_ego_translation))
         @ np.linalg.inv(h(src_ego.rotation, src_ego.translation))
         @ h(ref_ego.rotation, ref_ego.translation)
         @ h(ref_cam.cam_to_ego_rotation, ref_cam.cam_to_ego_translation))
    return T[:3, :3], T[:3, 3]


def test_mount_rotation_points_principal_axis_along_yaw():
    R = camera_mount_rotation(np.radians(90))
    np.testing.assert_allclose(R @ [0, 0, 1], [0, 1, 0], atol=1e-12)  # looks left
    np.testing.assert_allclose(R @ [0, 1, 0], [0, 0, -1], atol=1e-12)  # image down = ego down
    assert np.isclose(np.linalg.det(R), 1.0)


def test_identity_relative_pose():
    cam, ego = make_camera(), ego_at()
    R, t = compose_relative_pose(cam, ego, cam, ego)
    np.testing.assert_allclose(R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(t, 0.0, atol=1e-12)


def test_forward_motion_moves_source_behind():
    # camera at the ego origin looking along the driving direction; ego advances 1 m
    cam = make_camera(z=0.0)
    R, t = compose_relative_pose(cam, ego_at(0.0), cam, ego_at(1.0))
    np.testing.assert_allclose(R, np.eye(3), atol=1e-12)
    # points are 1 m farther from the previous camera position
    np.testing.assert_allclose(t, [0.0, 0.0, 1.0], atol=1e-12)
    Rc, tc = chained_relative_pose(cam, ego_at(0.0), cam, ego_at(1.0))
    np.testing.assert_allclose(t, tc, atol=1e-12)


def test_yawed_cameras_on_static_ego():
    ref, src = make_camera(0.0, name="A"), make_camera(60.0, name="B")
    ego = ego_at(3.0, -2.0, 15.0)
    R, t = compose_relative_pose(src, ego, ref, ego)
    np.testing.assert_allclose(R, src.cam_to_ego_rotation.T @ ref.cam_to_ego_rotation, atol=1e-12)
    Rc, tc = chained_relative_pose(src, ego, ref, ego)
    np.testing.assert_allclose(R, Rc, atol=1e-12)
    np.testing.assert_allclose(t, tc, atol=1e-12)


def test_random_poses_match_chained_oracle(rng):
    for _ in range(50):
        a, b = random_camera(rng, "A"), random_camera(rng, "B")
        ea, eb = random_ego(rng), random_ego(rng)
        R, t = compose_relative_pose(a, ea, b, eb)
        Rc, tc = chained_relative_pose(a, ea, b, eb)
        np.testing.assert_allclose(R, Rc, atol=1e-9)
        np.testing.assert_allclose(t, tc, atol=1e-9)


def test_non_orthonormal_rotation_rejected():
    bad = np.eye(3) * 1.01
    with pytest.raises(InvalidPoseError):
        EgoPose(0, bad, np.zeros(3))
    with pytest.raises(InvalidPoseError):
        CameraModel(np.eye(3), 10, 10, np.diag([1.0, 1.0, -1.0]), np.zeros(3), "mirror")


def test_oracle_source_backward_gives_farther_depth():
    cam = make_camera()
    rel = (np.eye(3), np.array([0.0, 0.0, 1.0]))
    cx, cy = cam.intrinsics[0, 2], cam.intrinsics[1, 2]
    u, v, z = project_point_oracle((cx, cy), 10.0, rel, cam, cam)
    assert z == pytest.approx(11.0)
    assert (u, v) == pytest.approx((cx, cy))


def test_oracle_behind_source():
    cam = make_camera()
    rel = (np.eye(3), np.array([0.0, 0.0, -20.0]))
    u, v, z = project_point_oracle((100.0, 100.0), 10.0, rel, cam, cam)
    assert z < 0 and np.isnan(u) and np.isnan(v)


def test_identity_homography():
    cam = make_camera()
    H = plane_homography((np.eye(3), np.zeros(3)), cam, cam, 7.5)
    np.testing.assert_allclose(H.matrix, np.eye(3), atol=1e-12)


def test_pure_rotation_homography_is_depth_independent(rng):
    a, b = make_camera(0.0, name="A"), make_camera(40.0, name="B")
    rel = (b.cam_to_ego_rotation.T @ a.cam_to_ego_rotation, np.zeros(3))
    H1 = plane_homography(rel, a, b, 3.0).matrix
    H2 = plane_homography(rel, a, b, 50.0).matrix
    np.testing.assert_allclose(H1, H2, atol=1e-12)


def test_homography_rejects_nonpositive_depth():
    cam = make_camera()
    for d in (0.0, -1.0, np.inf):
        with pytest.raises(DomainError):
            plane_homography((np.eye(3), np.zeros(3)), cam, cam, d)


def test_homography_matches_oracle_single_pixel(rng):
    a, b = random_camera(rng, "A"), random_camera(rng, "B")
    rel = compose_relative_pose(b, random_ego(rng), a, random_ego(rng))
    x, y, w = plane_homography(rel, a, b, 20.0).apply(100.0, 50.0)
    u, v, z = project_point_oracle((100.0, 50.0), 20.0, rel, a, b)
    if z > 1e-6:
        assert abs(x - u) < 1e-6 and abs(y - v) < 1e-6
        assert w * 20.0 == pytest.approx(z)


def test_inverse_pose_round_trip(rng):
    a, b = make_camera(0.0, name="A"), make_camera(30.0, (0.5, 0.3), name="B")
    ea, eb = ego_at(1.0, 0.2, 5.0), ego_at()
    rel = compose_relative_pose(b, eb, a, ea)
    inv = compose_relative_pose(a, ea, b, eb)
    for _ in range(20):
        p = (rng.uniform(0, 704), rng.uniform(0, 256))
        d = rng.uniform(2, 58)
        u, v, z = project_point_oracle(p, d, rel, a, b)
        if not z > 0.1:
            continue
        x, y, _ = plane_homography(inv, b, a, z).apply(u, v)
        assert (x, y) == pytest.approx(p, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.floats(2.0, 58.0))
def test_homography_agrees_with_oracle(seed, depth):
    rng = np.random.default_rng(seed)
    a, b = random_camera(rng, "A"), random_camera(rng, "B")
    rel = compose_relative_pose(b, random_ego(rng), a, random_ego(rng))
    p = (rng.uniform(0, a.width), rng.uniform(0, a.height))
    u, v, z = project_point_oracle(p, depth, rel, a, b)
    x, y, w = plane_homography(rel, a, b, depth).apply(*p)
    assert (w * depth > 1e-9) == (z > 1e-9)
    if z > 1e-3:
        scale = max(1.0, abs(u), abs(v))
        assert abs(x - u) <= 1e-9 * scale and abs(y - v) <= 1e-9 * scale


def test_pixel_centers():
    u, v = pixel_centers(16, 8, 4)
    np.testing.assert_allclose(u[0], [2.0, 6.0, 10.0, 14.0])
    np.testing.assert_allclose(v[:, 0], [2.0, 6.0])


def test_backproject_principal_point():
    cam = make_camera(0.0, (1.0, 0.0), z=1.5)
    cx, cy = cam.intrinsics[0, 2], cam.intrinsics[1, 2]
    np.testing.assert_allclose(backproject(cx, cy, 10.0, cam), [11.0, 0.0, 1.5], atol=1e-12)


def test_sample_positions_static_identity():
    cam = make_camera(width=64, height=32)
    grid = sample_positions(cam, [(cam, ego_at())], ego_at(), make_sid(count=8), stride=4)
    assert grid.coords.shape == (1, 8, 8, 16, 2)
    assert grid.valid.all()
    u, v = pixel_centers(64, 32, 4)
    np.testing.assert_allclose(grid.coords[0, 3, ..., 0], u, atol=1e-9)
    np.testing.assert_allclose(grid.coords[0, 3, ..., 1], v, atol=1e-9)


def test_sample_positions_cross_camera_after_turn():
    # ego turns right by 30 deg: a pixel at the front camera's right border was
    # seen by the front-right camera one frame earlier
    front, right = make_camera(0.0, (1.7, 0.0), name="F"), make_camera(-60.0, (1.5, -0.5), name="FR")
    prev, cur = ego_at(), ego_at(1.0, 0.0, -30.0)
    hyps = DepthHypothesisSet(np.array([20.0]), "ud", 2.0, 58.0)
    grid = sample_positions(front, [(front, prev), (right, prev)], cur, hyps, stride=4)
    r, c = 32, 175  # right-border texel on the middle row
    assert not grid.valid[0, 0, r, c]
    assert grid.valid[1, 0, r, c]
    rel = compose_relative_pose(right, prev, front, cur)
    u, v, _ = project_point_oracle(((c + 0.5) * 4, (r + 0.5) * 4), 20.0, rel, front, right)
    np.testing.assert_allclose(grid.coords[1, 0, r, c], [u, v], atol=1e-6)


def test_near_planes_lose_coverage_under_large_baseline():
    cam = make_camera(60.0, (1.5, 0.5))
    hyps = make_sid(count=2)
    grid = sample_positions(cam, [(cam, ego_at())], ego_at(3.0), hyps, stride=4)
    near, far = grid.valid[0, 0].mean(), grid.valid[0, 1].mean()
    assert near < far
    assert 1.0 - near > 0.05


def test_validity_implies_finite_in_bounds(rng):
    rig = [make_camera(60.0 * i, name=f"C{i}") for i in range(6)]
    grid = sample_positions(rig[0], [(c, ego_at()) for c in rig], ego_at(1.0, 0.0, 10.0), make_sid(count=16), stride=8)
    xy = grid.coords[grid.valid]
    assert np.isfinite(xy).all()
    assert (xy[:, 0] >= 0).all() and (xy[:, 0] < 704).all()
    assert (xy[:, 1] >= 0).all() and (xy[:, 1] < 256).all()
    assert np.isnan(grid.coords[~grid.valid]).all()


def test_sample_positions_needs_sources():
    cam = make_camera()
    with pytest.raises(DomainError):
        sample_positions(cam, [], ego_at(), make_sid(count=4))
