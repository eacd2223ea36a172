"""Plane-sweep warping of previous-frame features into the reference view."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, DomainError, ShapeError
from .geometry import CameraModel, EgoPose, sample_positions
from .tensors import FeatureMap, WarpedVolume

SWEEP_MODES = ("surround", "same_camera")


@dataclass
class SourceView:
    """A previous-frame feature map together with the camera and ego pose it was taken at."""

    features: FeatureMap
    camera: CameraModel
    ego: EgoPose


def _bilinear(data, fx, fy):
    # data (C, H, W); fx, fy texel-index coordinates (texel centers at integers)
    _, H, W = data.shape
    fx = np.clip(fx, 0.0, W - 1)
    fy = np.clip(fy, 0.0, H - 1)
    x0 = np.minimum(np.floor(fx).astype(np.int64), max(W - 2, 0))
    y0 = np.minimum(np.floor(fy).astype(np.int64), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    ax = fx - x0
    ay = fy - y0
    top = data[:, y0, x0] * (1.0 - ax) + data[:, y0, x1] * ax
    bottom = data[:, y1, x0] * (1.0 - ax) + data[:, y1, x1] * ax
    return top * (1.0 - ay) + bottom * ay


def bilinear_sample(fmap: FeatureMap, u: float, v: float) -> np.ndarray:
    """Bilinearly interpolate ``fmap`` at image pixel ``(u, v)``.

    The feature texel (i, j) is centered at image coordinates
    ``((j + 0.5) * stride, (i + 0.5) * stride)``; samples between the outermost
    texel centers and the image border take the border texel value.
    """
    H, W = fmap.shape
    n = fmap.stride
    if not (0 <= u < W * n and 0 <= v < H * n):
        raise ContractError(f"sample ({u}, {v}) outside the {W * n}x{H * n} image")
    return _bilinear(fmap.data, np.asarray(u / n - 0.5), np.asarray(v / n - 0.5))


def build_warped_volume(ref_cam: CameraModel, ref_ego: EgoPose, ref_features: FeatureMap,
                        sources: Sequence[SourceView], hypotheses, mode: str = "surround") -> WarpedVolume:
    """Average bilinear samples of all valid source views per (depth, reference texel)."""
    if mode not in SWEEP_MODES:
        raise DomainError(f"unknown sweep mode {mode!r}; expected one of {SWEEP_MODES}")
    C, H, W = ref_features.data.shape
    n = ref_features.stride
    for src in sources:
        if src.features.channels != C or src.features.stride != n:
            raise ShapeError(
                f"source {src.camera.camera_id}: channels/stride {src.features.channels}/{src.features.stride}"
                f" do not match reference {C}/{n}"
            )
    if mode == "same_camera":
        sources = [s for s in sources if s.camera.camera_id == ref_cam.camera_id]
    sources = sorted(sources, key=lambda s: s.camera.camera_id)

    D = len(hypotheses.centers)
    data = np.zeros((C, D * H * W))
    count = np.zeros(D * H * W, dtype=np.int64)
    for src in sources:
        grid = sample_positions(ref_cam, [(src.camera, src.ego)], ref_ego, hypotheses, stride=n)
        valid = grid.valid[0].reshape(-1)
        idx = np.flatnonzero(valid)
        if idx.size == 0:
            continue
        uv = grid.coords[0].reshape(-1, 2)[idx]
        fmap = src.features
        if fmap.shape != (src.camera.height // n, src.camera.width // n):
            raise ShapeError(f"source {src.camera.camera_id}: feature grid {fmap.shape} does not match camera")
        data[:, idx] += _bilinear(fmap.data, uv[:, 0] / n - 0.5, uv[:, 1] / n - 0.5)
        count[idx] += 1
    hit = count > 0
    data[:, hit] /= count[hit]
    return WarpedVolume(data.reshape(C, D, H, W), count.reshape(D, H, W))
