import numpy as np
import pytest

from sts import synthworld as sw
from sts.geometry import CameraModel, EgoPose, camera_mount_rotation, intrinsics_from_fov, rotation_z


def make_camera(yaw_deg=0.0, xy=(0.0, 0.0), width=704, height=256, hfov=70.0, name="CAM", z=1.5):
    K = intrinsics_from_fov(width, height, hfov)
    return CameraModel(K, width, height, camera_mount_rotation(np.radians(yaw_deg)), np.array([xy[0], xy[1], z]), name)


def ego_at(x=0.0, y=0.0, yaw_deg=0.0, ts=0):
    return EgoPose(ts, rotation_z(np.radians(yaw_deg)), np.array([x, y, 0.0]))


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_camera(rng, name="CAM"):
    w = int(rng.integers(64, 1600))
    h = int(rng.integers(48, 900))
    fx, fy = rng.uniform(100, 2000, 2)
    K = np.array([[fx, rng.uniform(-2, 2), rng.uniform(0, w)], [0.0, fy, rng.uniform(0, h)], [0.0, 0.0, 1.0]])
    return CameraModel(K, w, h, random_rotation(rng), rng.uniform(-3, 3, 3), name)


def random_ego(rng, ts=0):
    return EgoPose(ts, random_rotation(rng), rng.uniform(-10, 10, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_rig():
    return sw.default_rig(width=176, height=64)


@pytest.fixture(scope="session")
def small_room(small_rig):
    """Reduced-resolution compact room, cheap enough for unit tests."""
    spec = sw.static_room_scene()
    spec.rig = small_rig
    return spec
