"""Deterministic synthetic multi-camera world.

Scenes are made of textured rectangles (walls, ground, billboards) seen by a
rig of pinhole cameras moving along a list of ego poses. Rendering ray-casts
every feature texel center, so a frame yields per-camera feature maps, z-depth
ground truth and masks for moving and texture-less surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, SceneError
from .geometry import (
    CameraModel,
    EgoPose,
    camera_mount_rotation,
    intrinsics_from_fov,
    pixel_centers,
    rotation_z,
)
from .tensors import DepthLogits, FeatureMap

IMAGE_WIDTH = 704
IMAGE_HEIGHT = 256
HFOV_DEG = 70.0
CAMERA_HEIGHT = 1.5
DEFAULT_CHANNELS = 32
DEFAULT_STRIDE = 4
CAMERA_NAMES = ("CAM_FRONT", "CAM_FRONT_LEFT", "CAM_BACK_LEFT", "CAM_BACK", "CAM_BACK_RIGHT", "CAM_FRONT_RIGHT")


@dataclass
class Surface:
    """Textured rectangle ``center + s*axis_u + t*axis_v`` with |s| <= half_u, |t| <= half_v.

    ``velocity`` is in meters per frame (world frame); ``texture_scale`` is the
    lattice spacing of the value noise in meters.
    """

    name: str
    center: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    half_u: float
    half_v: float
    texture_scale: float = 0.5
    texture_id: int = 0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.axis_u = np.asarray(self.axis_u, dtype=np.float64)
        self.axis_v = np.asarray(self.axis_v, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        for name, a in (("axis_u", self.axis_u), ("axis_v", self.axis_v)):
            if abs(np.linalg.norm(a) - 1.0) > 1e-9:
                raise SceneError(f"surface {self.name}: {name} must be a unit vector")
        if abs(self.axis_u @ self.axis_v) > 1e-9:
            raise SceneError(f"surface {self.name}: axes must be orthogonal")
        if self.half_u <= 0 or self.half_v <= 0 or self.texture_scale <= 0:
            raise SceneError(f"surface {self.name}: sizes must be positive")

    @property
    def normal(self):
        return np.cross(self.axis_u, self.axis_v)

    @property
    def moving(self) -> bool:
        return bool(np.any(self.velocity != 0))


@dataclass
class TexturelessPatch:
    """Constant-feature rectangle ``[s0, s1] x [t0, t1]`` in a surface's local coordinates."""

    surface: str
    s_range: Tuple[float, float]
    t_range: Tuple[float, float]


@dataclass
class SceneSpec:
    seed: int
    surfaces: List[Surface]
    rig: List[CameraModel]
    trajectory: List[EgoPose]
    textureless_regions: List[TexturelessPatch] = field(default_factory=list)
    channels: int = DEFAULT_CHANNELS
    feature_stride: int = DEFAULT_STRIDE
    feature_gain: float = 1.0
    textureless_value: float = 0.2


@dataclass
class RenderedFrame:
    features: FeatureMap
    gt_depth: np.ndarray  # z-depth in meters, 0 where no surface is hit
    moving_mask: np.ndarray
    textureless_mask: np.ndarray
    surface_index: np.ndarray  # -1 for sky

    @property
    def camera_id(self):
        return self.features.camera_id


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _texture_table(spec: SceneSpec, index: int, surface: Surface):
    na = int(np.ceil(2 * surface.half_u / surface.texture_scale)) + 2
    nb = int(np.ceil(2 * surface.half_v / surface.texture_scale)) + 2
    rng = np.random.default_rng([spec.seed, index, surface.texture_id])
    return rng.standard_normal((spec.channels, na, nb))


def value_noise(table, a, b):
    """Quintic-interpolated lattice noise; ``a``, ``b`` in lattice units. Returns (C, N)."""
    _, na, nb = table.shape
    i = np.clip(np.floor(a).astype(np.int64), 0, na - 2)
    j = np.clip(np.floor(b).astype(np.int64), 0, nb - 2)
    wa = _fade(np.clip(a - i, 0.0, 1.0))
    wb = _fade(np.clip(b - j, 0.0, 1.0))
    top = table[:, i, j] * (1 - wa) + table[:, i + 1, j] * wa
    bottom = table[:, i, j + 1] * (1 - wa) + table[:, i + 1, j + 1] * wa
    return top * (1 - wb) + bottom * wb


def surface_texture(spec: SceneSpec, index: int, s, t, table=None):
    """Feature vectors (C, N) at local coordinates of surface ``index``.

    Each vector is rescaled to norm ``feature_gain * sqrt(C)``.
    """
    surface = spec.surfaces[index]
    if table is None:
        table = _texture_table(spec, index, surface)
    raw = value_noise(table, (s + surface.half_u) / surface.texture_scale, (t + surface.half_v) / surface.texture_scale)
    norm = np.linalg.norm(raw, axis=0)
    return raw * (spec.feature_gain * np.sqrt(spec.channels) / np.maximum(norm, 1e-12))


def surfaces_at(spec: SceneSpec, frame: int):
    return [s.center + frame * s.velocity for s in spec.surfaces]


def _validate(spec: SceneSpec, frame: int):
    if not spec.rig:
        raise SceneError("scene has an empty camera rig")
    if not spec.trajectory:
        raise SceneError("scene has an empty trajectory")
    if not 0 <= frame < len(spec.trajectory):
        raise SceneError(f"frame {frame} outside trajectory of length {len(spec.trajectory)}")
    names = {s.name for s in spec.surfaces}
    for patch in spec.textureless_regions:
        if patch.surface not in names:
            raise SceneError(f"texture-less patch references unknown surface {patch.surface!r}")


def cast_rays(spec: SceneSpec, frame: int, cam: CameraModel, stride: int):
    """Nearest surface hit per texel: (depth, surface index, local s, local t), each (H', W')."""
    ego = spec.trajectory[frame]
    u, v = pixel_centers(cam.width, cam.height, stride)
    rays_cam = np.stack([u, v, np.ones_like(u)], axis=-1) @ np.linalg.inv(cam.intrinsics).T
    R_wc = ego.rotation @ cam.cam_to_ego_rotation
    origin = ego.rotation @ cam.cam_to_ego_translation + ego.translation
    dirs = rays_cam.reshape(-1, 3) @ R_wc.T  # camera z-depth == ray parameter
    N = dirs.shape[0]
    depth = np.full(N, np.inf)
    index = np.full(N, -1, dtype=np.int64)
    s_loc = np.zeros(N)
    t_loc = np.zeros(N)
    for k, (surface, center) in enumerate(zip(spec.surfaces, surfaces_at(spec, frame))):
        n = surface.normal
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = ((center - origin) @ n) / denom
        ok = np.isfinite(lam) & (lam > 1e-6) & (np.abs(denom) > 1e-12)
        p = origin + lam[:, None] * dirs
        rel = p - center
        s = rel @ surface.axis_u
        t = rel @ surface.axis_v
        ok &= (np.abs(s) <= surface.half_u) & (np.abs(t) <= surface.half_v) & (lam < depth)
        depth = np.where(ok, lam, depth)
        index = np.where(ok, k, index)
        s_loc = np.where(ok, s, s_loc)
        t_loc = np.where(ok, t, t_loc)
    shape = u.shape
    depth = np.where(index >= 0, depth, 0.0)
    return depth.reshape(shape), index.reshape(shape), s_loc.reshape(shape), t_loc.reshape(shape)


def render(spec: SceneSpec, frame: int, stride: Optional[int] = None) -> List[RenderedFrame]:
    """Render every rig camera at ``frame`` on the ``stride`` grid (default: feature stride)."""
    _validate(spec, frame)
    stride = stride or spec.feature_stride
    tables = [_texture_table(spec, k, s) for k, s in enumerate(spec.surfaces)]
    names = [s.name for s in spec.surfaces]
    out = []
    for cam in spec.rig:
        depth, index, s_loc, t_loc = cast_rays(spec, frame, cam, stride)
        H, W = depth.shape
        feats = np.zeros((spec.channels, H * W))
        flat_index = index.reshape(-1)
        textureless = np.zeros(H * W, dtype=bool)
        moving = np.zeros(H * W, dtype=bool)
        for k, surface in enumerate(spec.surfaces):
            hit = np.flatnonzero(flat_index == k)
            if hit.size == 0:
                continue
            s = s_loc.reshape(-1)[hit]
            t = t_loc.reshape(-1)[hit]
            feats[:, hit] = surface_texture(spec, k, s, t, tables[k])
            moving[hit] = surface.moving
            for patch in spec.textureless_regions:
                if patch.surface != names[k]:
                    continue
                inside = ((s >= patch.s_range[0]) & (s <= patch.s_range[1])
                          & (t >= patch.t_range[0]) & (t <= patch.t_range[1]))
                textureless[hit[inside]] = True
        feats[:, textureless] = spec.textureless_value
        out.append(RenderedFrame(
            FeatureMap(feats.reshape(spec.channels, H, W), stride, cam.camera_id, spec.trajectory[frame].timestamp),
            depth,
            moving.reshape(H, W),
            textureless.reshape(H, W),
            index,
        ))
    return out


@dataclass
class MonoQuality:
    """Synthetic monocular network quality.

    ``sigma_bins`` is the Gaussian width over bin indices and ``noise`` the
    standard deviation of additive logit noise. With ``depth_scale`` set, both
    grow linearly with GT depth and equal their nominal value at that depth.
    """

    sigma_bins: float = 3.0
    noise: float = 0.0
    depth_scale: Optional[float] = None
    seed: Union[int, Sequence[int]] = 0


LOGIT_FLOOR = -1e4


def mono_oracle(gt_depth, bins, quality: MonoQuality = MonoQuality(), stride: int = 1) -> DepthLogits:
    """Log of a discretized Gaussian around the GT bin, plus seeded noise.

    Pixels without GT (sky, out of range) get flat logits.
    """
    if not quality.sigma_bins > 0:
        raise DomainError(f"sigma_bins must be positive, got {quality.sigma_bins}")
    gt_depth = np.asarray(gt_depth, dtype=np.float64)
    gt_bin = bins.assign(gt_depth)
    valid = gt_bin >= 0
    scale = np.ones_like(gt_depth)
    if quality.depth_scale:
        scale = np.where(valid, gt_depth / quality.depth_scale, 1.0)
    sigma = quality.sigma_bins * scale
    k = np.arange(bins.count).reshape(-1, 1, 1)
    logits = -0.5 * ((k - gt_bin[None]) / sigma[None]) ** 2
    logits = np.maximum(logits, LOGIT_FLOOR)
    logits -= np.log(np.exp(logits - logits.max(axis=0)).sum(axis=0)) + logits.max(axis=0)
    if quality.noise > 0:
        rng = np.random.default_rng(quality.seed)
        logits = logits + rng.standard_normal(logits.shape) * (quality.noise * scale)[None]
    logits = np.where(valid[None], logits, 0.0)
    return DepthLogits(logits, stride, bins)


def project_points_to_depth(points, cam: CameraModel, stride: int = 1) -> np.ndarray:
    """Z-buffered projection of ego-frame points; 0 marks pixels without data."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    X = (points - cam.cam_to_ego_translation) @ cam.cam_to_ego_rotation  # ego -> camera
    H, W = cam.height // stride, cam.width // stride
    depth = np.zeros((H, W))
    front = X[:, 2] > 1e-9
    X = X[front]
    if X.shape[0] == 0:
        return depth
    p = X @ cam.intrinsics.T
    u = p[:, 0] / p[:, 2] / stride
    v = p[:, 1] / p[:, 2] / stride
    ok = (u >= 0) & (u < W) & (v >= 0) & (v < H)
    col = np.floor(u[ok]).astype(np.int64)
    row = np.floor(v[ok]).astype(np.int64)
    z = X[ok, 2]
    key = row * W + col
    order = np.lexsort((z, key))
    first = np.unique(key[order], return_index=True)[1]
    nearest = order[first]
    depth.reshape(-1)[key[nearest]] = z[nearest]
    return depth


# ---------------------------------------------------------------------------
# rigs, trajectories and preset scenes


# (x, y) mount positions in the ego frame, meters; vehicle-like layout with the
# ego origin at the rear axle
MOUNT_XY = {
    "CAM_FRONT": (1.70, 0.00),
    "CAM_FRONT_LEFT": (1.52, 0.49),
    "CAM_BACK_LEFT": (1.05, 0.48),
    "CAM_BACK": (0.05, 0.00),
    "CAM_BACK_RIGHT": (1.05, -0.48),
    "CAM_FRONT_RIGHT": (1.52, -0.49),
}


def default_rig(width=IMAGE_WIDTH, height=IMAGE_HEIGHT, hfov=HFOV_DEG) -> List[CameraModel]:
    """Six level cameras at 60 degree yaw spacing."""
    K = intrinsics_from_fov(width, height, hfov)
    rig = []
    for i, name in enumerate(CAMERA_NAMES):
        yaw = np.radians(60.0 * i)
        x, y = MOUNT_XY[name]
        rig.append(CameraModel(K, width, height, camera_mount_rotation(yaw), np.array([x, y, CAMERA_HEIGHT]), name))
    return rig


def straight_trajectory(frames=2, step=1.0, heading=0.0) -> List[EgoPose]:
    direction = np.array([np.cos(heading), np.sin(heading), 0.0])
    return [EgoPose(f, rotation_z(heading), f * step * direction) for f in range(frames)]


def turning_trajectory(frames=2, step=1.0, yaw_rate_deg=20.0) -> List[EgoPose]:
    poses = []
    pos = np.zeros(3)
    yaw = 0.0
    for f in range(frames):
        poses.append(EgoPose(f, rotation_z(yaw), pos.copy()))
        pos = pos + step * np.array([np.cos(yaw), np.sin(yaw), 0.0])
        yaw += np.radians(yaw_rate_deg)
    return poses


def _wall(name, center, normal_yaw, half_width, height, scale, texture_id=0, velocity=(0, 0, 0)):
    # vertical rectangle whose u axis is horizontal, facing azimuth normal_yaw
    u = np.array([-np.sin(normal_yaw), np.cos(normal_yaw), 0.0])
    v = np.array([0.0, 0.0, 1.0])
    return Surface(name, np.asarray(center, float), u, v, half_width, height / 2.0, scale, texture_id, np.asarray(velocity, float))


def _ground(half=60.0, scale=0.35, center=(0.0, 0.0)):
    return Surface("ground", np.array([center[0], center[1], 0.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
                   half, half, scale, 0)


def room_surfaces(front=20.0, back=16.0, left=12.0, right=12.0, height=30.0, scale=0.35):
    """Ground plus four walls enclosing the ego; walls face inward."""
    span_x = (front + back) / 2.0 + 1.0
    span_y = (left + right) / 2.0 + 1.0
    cx = (front - back) / 2.0
    cy = (left - right) / 2.0
    return [
        _ground(scale=scale),
        _wall("wall_front", (front, cy, height / 2.0), np.pi, span_y, height, scale),
        _wall("wall_back", (-back, cy, height / 2.0), 0.0, span_y, height, scale),
        _wall("wall_left", (cx, left, height / 2.0), -np.pi / 2, span_x, height, scale),
        _wall("wall_right", (cx, -right, height / 2.0), np.pi / 2, span_x, height, scale),
    ]


def static_room_scene(seed=0, step=1.0, **kw) -> SceneSpec:
    """Compact static textured room; straight forward ego step between two frames.

    Walls are close enough that most pixels away from the focus of expansion
    see at least half a feature texel of parallax between neighboring depth
    bins, and the texture is fine enough to alias sparse depth samples.
    """
    surfaces = room_surfaces(front=5.0, back=5.0, left=4.0, right=4.0, scale=0.1)
    return SceneSpec(seed, surfaces, default_rig(), straight_trajectory(2, step), **kw)


def billboard_turn_scene(seed=0, **kw) -> SceneSpec:
    """Ego turning left past a static billboard.

    At t-1 the billboard is only visible in CAM_FRONT_LEFT; after the turn it
    lies mostly in CAM_FRONT, so its matches cross cameras.
    """
    surfaces = room_surfaces(front=30.0, back=30.0, left=30.0, right=30.0, scale=0.5)
    yaw = np.radians(47.0)
    dist = 12.0
    center = (dist * np.cos(yaw), dist * np.sin(yaw), 2.5)
    surfaces.append(_wall("billboard", center, yaw + np.pi, 1.5, 5.0, 0.15, texture_id=1))
    return SceneSpec(seed, surfaces, default_rig(), turning_trajectory(2, 1.0, yaw_rate_deg=25.0), **kw)


def moving_object_scene(seed=0, speed=1.0, **kw) -> SceneSpec:
    """Static room with a billboard crossing in front of the ego and a texture-less wall patch."""
    surfaces = room_surfaces(front=40.0, back=30.0, left=30.0, right=30.0)
    surfaces.append(_wall("mover", (14.0, -1.0, 2.5), np.pi, 3.0, 5.0, 0.25, texture_id=2, velocity=(0.0, speed, 0.0)))
    patches = [TexturelessPatch("wall_front", (-8.0, 8.0), (-13.0, -5.0))]
    return SceneSpec(seed, surfaces, default_rig(), straight_trajectory(2, 1.0), patches, **kw)


def range_scene(seed=0, step=3.0, **kw) -> SceneSpec:
    """Open scene spanning 2-58 m, for range-binned evaluation.

    The 3 m step is roughly the ego travel between a key frame and a sweep
    a third of a second earlier at urban speed.
    """
    surfaces = room_surfaces(front=55.0, back=50.0, left=40.0, right=40.0, scale=0.5)
    # scatter billboards at several distances
    for i, (dist, az) in enumerate([(25.0, 20.0), (35.0, -25.0), (42.0, 75.0), (32.0, 115.0), (48.0, 180.0),
                                    (38.0, -140.0), (28.0, -80.0), (50.0, 5.0)]):
        a = np.radians(az)
        surfaces.append(_wall(f"board{i}", (dist * np.cos(a), dist * np.sin(a), 4.0), a + np.pi, 5.0, 8.0, 0.5,
                              texture_id=10 + i))
    return SceneSpec(seed, surfaces, default_rig(), straight_trajectory(2, step), **kw)


PRESETS = {
    "static_room": static_room_scene,
    "billboard_turn": billboard_turn_scene,
    "moving_object": moving_object_scene,
    "range": range_scene,
}


def preset(name: str, seed: int = 0) -> SceneSpec:
    try:
        return PRESETS[name](seed=seed)
    except KeyError:
        raise SceneError(f"unknown scene preset {name!r}; choose from {sorted(PRESETS)}") from None
