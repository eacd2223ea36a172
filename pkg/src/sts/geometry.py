"""Camera models, rigid transforms and plane-induced homographies.

Coordinate conventions
----------------------
Camera frame: x right, y down, z forward along the principal axis.
Ego frame:    x forward, y left, z up (origin on the ground plane).
Pixels:       (u, v) continuous image coordinates; the center of pixel
              (row i, column j) sits at (j + 0.5, i + 0.5).

Camera extrinsics are stored camera-to-ego, ego poses ego-to-world.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidPoseError

ORTHO_TOL = 1e-9
# Points closer than this to the source image plane are treated as behind it.
MIN_SOURCE_DEPTH = 1e-9
PRINCIPAL_AXIS = np.array([0.0, 0.0, 1.0])


def _check_rotation(R, what):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidPoseError(f"{what}: expected a finite 3x3 rotation, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
        raise InvalidPoseError(f"{what}: rotation is not orthonormal")
    if np.linalg.det(R) <= 0:
        raise InvalidPoseError(f"{what}: rotation has det <= 0 (reflection)")
    return R


def _check_vector(t, what):
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if t.shape != (3,) or not np.all(np.isfinite(t)):
        raise InvalidPoseError(f"{what}: expected a finite 3-vector")
    return t


def rotation_z(angle):
    """Rotation by ``angle`` radians about +z."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def intrinsics_from_fov(width, height, hfov_deg):
    """Square-pixel pinhole intrinsics with the principal point at the image center."""
    f = 0.5 * width / np.tan(np.radians(hfov_deg) / 2.0)
    return np.array([[f, 0.0, width / 2.0], [0.0, f, height / 2.0], [0.0, 0.0, 1.0]])


def camera_mount_rotation(yaw):
    """Camera-to-ego rotation of a level camera looking along ego azimuth ``yaw``."""
    c, s = np.cos(yaw), np.sin(yaw)
    # columns: camera x (right), y (down), z (forward) expressed in the ego frame
    return np.array([[s, 0.0, c], [-c, 0.0, s], [0.0, -1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class CameraModel:
    intrinsics: np.ndarray
    width: int
    height: int
    cam_to_ego_rotation: np.ndarray
    cam_to_ego_translation: np.ndarray
    camera_id: str

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        if K.shape != (3, 3) or not np.all(np.isfinite(K)):
            raise DomainError(f"camera {self.camera_id}: K must be a finite 3x3 matrix")
        if K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0:
            raise DomainError(f"camera {self.camera_id}: K must be upper-triangular")
        if K[0, 0] <= 0 or K[1, 1] <= 0 or K[2, 2] != 1.0:
            raise DomainError(f"camera {self.camera_id}: K needs positive focal lengths and K[2,2] = 1")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise DomainError(f"camera {self.camera_id}: image size must be positive")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(
            self, "cam_to_ego_rotation",
            _check_rotation(self.cam_to_ego_rotation, f"camera {self.camera_id}"),
        )
        object.__setattr__(
            self, "cam_to_ego_translation",
            _check_vector(self.cam_to_ego_translation, f"camera {self.camera_id}"),
        )

    @property
    def cam_to_ego(self) -> np.ndarray:
        return to_homogeneous(self.cam_to_ego_rotation, self.cam_to_ego_translation)

    def scaled(self, stride: int) -> "CameraModel":
        """The same camera observed on a grid down-sampled by ``stride``."""
        S = np.diag([1.0 / stride, 1.0 / stride, 1.0])
        return CameraModel(
            S @ self.intrinsics, self.width // stride, self.height // stride,
            self.cam_to_ego_rotation, self.cam_to_ego_translation, self.camera_id,
        )


@dataclass(frozen=True, eq=False)
class EgoPose:
    timestamp: int
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, f"ego pose {self.timestamp}"))
        object.__setattr__(self, "translation", _check_vector(self.translation, f"ego pose {self.timestamp}"))

    @property
    def ego_to_world(self) -> np.ndarray:
        return to_homogeneous(self.rotation, self.translation)


@dataclass(frozen=True, eq=False)
class Homography:
    matrix: np.ndarray
    depth: float
    ref_camera: str
    src_camera: str

    def apply(self, u, v):
        """Map pixel(s) through the homography; returns (u', v', w')."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        H = self.matrix
        x = H[0, 0] * u + H[0, 1] * v + H[0, 2]
        y = H[1, 0] * u + H[1, 1] * v + H[1, 2]
        w = H[2, 0] * u + H[2, 1] * v + H[2, 2]
        return x / w, y / w, w


@dataclass
class SampleGrid:
    """Warp targets of every (source, depth, reference pixel).

    ``coords`` has shape (S, D, H, W, 2) in source image pixels, ``valid``
    shape (S, D, H, W). Coordinates are NaN wherever ``valid`` is False.
    """

    coords: np.ndarray
    valid: np.ndarray
    source_ids: list = field(default_factory=list)

    @property
    def valid_count(self) -> np.ndarray:
        return self.valid.sum(axis=0)


def to_homogeneous(R, t):
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = t
    return T


def invert_rigid(T):
    R, t = T[:3, :3], T[:3, 3]
    return to_homogeneous(R.T, -R.T @ t)


def compose_relative_pose(src_cam: CameraModel, src_ego: EgoPose, ref_cam: CameraModel, ref_ego: EgoPose):
    """Rigid transform from the reference camera frame to the source camera frame.

    Returns ``(R_rel, t_rel)`` with ``X_src = R_rel @ X_ref + t_rel``.
    """
    for R, what in ((src_cam.cam_to_ego_rotation, "source camera"), (src_ego.rotation, "source ego"),
                    (ref_cam.cam_to_ego_rotation, "reference camera"), (ref_ego.rotation, "reference ego")):
        _check_rotation(R, what)
    # cam_ref -> ego_t -> world -> ego_{t-1} -> cam_src
    T = (
        invert_rigid(src_cam.cam_to_ego)
        @ invert_rigid(src_ego.ego_to_world)
        @ ref_ego.ego_to_world
        @ ref_cam.cam_to_ego
    )
    return T[:3, :3].copy(), T[:3, 3].copy()


def homography_matrix(rel, K_ref, K_src, depth):
    R, t = rel
    return K_src @ (R + np.outer(t, PRINCIPAL_AXIS) / depth) @ np.linalg.inv(K_ref)


def plane_homography(rel, ref_cam: CameraModel, src_cam: CameraModel, depth: float) -> Homography:
    """Homography induced by the fronto-parallel plane Z = depth of the reference camera."""
    if not depth > 0 or not np.isfinite(depth):
        raise DomainError(f"plane depth must be positive and finite, got {depth}")
    R, t = rel
    H = homography_matrix((np.asarray(R, float), np.asarray(t, float)), ref_cam.intrinsics, src_cam.intrinsics, depth)
    return Homography(H, float(depth), ref_cam.camera_id, src_cam.camera_id)


def project_point_oracle(pixel, depth, rel, ref_cam: CameraModel, src_cam: CameraModel):
    """Backproject ``pixel`` at ``depth``, move it into the source frame and project.

    Returns ``(u, v, z_src)``. When the point is behind the source camera
    (``z_src <= MIN_SOURCE_DEPTH``) ``u`` and ``v`` are NaN.
    """
    if not depth > 0:
        raise DomainError(f"depth must be positive, got {depth}")
    R, t = rel
    u, v = pixel
    ray = np.linalg.solve(ref_cam.intrinsics, np.array([u, v, 1.0]))
    X_src = np.asarray(R) @ (depth * ray) + np.asarray(t)
    z = float(X_src[2])
    if z <= MIN_SOURCE_DEPTH:
        return float("nan"), float("nan"), z
    p = src_cam.intrinsics @ (X_src / z)
    return float(p[0]), float(p[1]), z


def pixel_centers(width, height, stride=1):
    """Image coordinates of the centers of a ``stride``-down-sampled grid, each (H', W')."""
    hs, ws = height // stride, width // stride
    u = (np.arange(ws) + 0.5) * stride
    v = (np.arange(hs) + 0.5) * stride
    return np.meshgrid(u, v)


def sample_positions(ref_cam: CameraModel, sources: Sequence, ref_ego: EgoPose, hypotheses, stride: int = 1) -> SampleGrid:
    """Warp every reference pixel center into every source view at every depth.

    ``sources`` is a sequence of ``(CameraModel, EgoPose)`` pairs. Reference
    pixels are the centers of the ``stride`` grid (image coordinates).
    """
    if len(sources) == 0:
        raise DomainError("at least one source view is required")
    depths = np.asarray(hypotheses.centers, dtype=np.float64)
    if depths.size == 0:
        raise DomainError("hypothesis set is empty")
    u, v = pixel_centers(ref_cam.width, ref_cam.height, stride)
    S, D = len(sources), depths.size
    coords = np.full((S, D) + u.shape + (2,), np.nan)
    valid = np.zeros((S, D) + u.shape, dtype=bool)
    for s, (src_cam, src_ego) in enumerate(sources):
        rel = compose_relative_pose(src_cam, src_ego, ref_cam, ref_ego)
        for k, d in enumerate(depths):
            x, y, w = plane_homography(rel, ref_cam, src_cam, d).apply(u, v)
            # third homogeneous component equals z_src / d
            ok = (w * d > MIN_SOURCE_DEPTH) & np.isfinite(x) & np.isfinite(y)
            ok &= (x >= 0) & (x < src_cam.width) & (y >= 0) & (y < src_cam.height)
            coords[s, k, ..., 0] = np.where(ok, x, np.nan)
            coords[s, k, ..., 1] = np.where(ok, y, np.nan)
            valid[s, k] = ok
    return SampleGrid(coords, valid, [c.camera_id for c, _ in sources])


def backproject(u, v, depth, cam: CameraModel):
    """Ego-frame points of pixels ``(u, v)`` at z-depth ``depth`` (broadcast), shape (..., 3)."""
    Kinv = np.linalg.inv(cam.intrinsics)
    u, v, depth = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(depth, float))
    rays = np.stack([u, v, np.ones_like(u)], axis=-1) @ Kinv.T
    X_cam = rays * depth[..., None]
    return X_cam @ cam.cam_to_ego_rotation.T + cam.cam_to_ego_translation
