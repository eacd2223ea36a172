"""Lift depth-weighted image features into frustums and splat them onto a BEV grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import DomainError, ShapeError
from .geometry import CameraModel, backproject, pixel_centers
from .tensors import DepthDistribution, FeatureMap


@dataclass(frozen=True)
class GridConfig:
    x_min: float = -51.2
    x_max: float = 51.2
    y_min: float = -51.2
    y_max: float = 51.2
    cell_size: float = 0.8

    def __post_init__(self):
        if self.cell_size <= 0 or self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise DomainError("invalid BEV grid extent")
        for span in (self.x_max - self.x_min, self.y_max - self.y_min):
            cells = span / self.cell_size
            if abs(cells - round(cells)) > 1e-9:
                raise DomainError(f"extent {span} m is not a whole number of {self.cell_size} m cells")

    @property
    def shape(self):
        return (int(round((self.x_max - self.x_min) / self.cell_size)),
                int(round((self.y_max - self.y_min) / self.cell_size)))

    @property
    def origin(self):
        return (self.x_min, self.y_min)


@dataclass
class BevGrid:
    data: np.ndarray  # (C, X, Y)
    config: GridConfig

    @property
    def origin(self):
        return self.config.origin

    @property
    def cell_size(self):
        return self.config.cell_size


@dataclass
class FrustumPoints:
    """Lifted points. Point ``i`` carries ``probs[i] * features[:, pixel[i]]``."""

    points: np.ndarray  # (N, 3) ego frame
    probs: np.ndarray  # (N,)
    pixel: np.ndarray  # (N,) flat index into the feature grid
    bin: np.ndarray  # (N,)
    features: np.ndarray  # (C, P)

    @property
    def weights(self) -> np.ndarray:
        return self.features[:, self.pixel] * self.probs


def lift(features: FeatureMap, dist: DepthDistribution, cam: CameraModel, min_prob: float = 0.0) -> FrustumPoints:
    """One ego-frame point per (pixel, depth bin) with probability above ``min_prob``."""
    C, H, W = features.data.shape
    if dist.probs.shape[1:] != (H, W):
        raise ShapeError(f"distribution grid {dist.probs.shape[1:]} does not match features {(H, W)}")
    u, v = pixel_centers(cam.width, cam.height, features.stride)
    if u.shape != (H, W):
        raise ShapeError(f"camera grid {u.shape} at stride {features.stride} does not match features {(H, W)}")
    probs = dist.probs.reshape(dist.probs.shape[0], -1)  # (D, P)
    b, p = np.nonzero(probs > min_prob)
    centers = np.asarray(dist.bins.centers)
    pts = backproject(u.reshape(-1)[p], v.reshape(-1)[p], centers[b], cam)
    return FrustumPoints(pts, probs[b, p], p, b, features.data.reshape(C, -1))


def splat(frustums: Union[FrustumPoints, Iterable[FrustumPoints]], config: GridConfig = GridConfig()) -> BevGrid:
    """Sum-pool frustum weights into the ground-plane cell under each point.

    Within a frustum, contributions are summed in (cell, pixel, bin) order, so
    the result does not depend on the order of the points.
    """
    if isinstance(frustums, FrustumPoints):
        frustums = [frustums]
    frustums = list(frustums)
    X, Y = config.shape
    C = frustums[0].features.shape[0] if frustums else 0
    flat = np.zeros((X * Y, C))
    for fr in frustums:
        if fr.features.shape[0] != C:
            raise ShapeError("frustums carry different feature widths")
        ix = np.floor((fr.points[:, 0] - config.x_min) / config.cell_size).astype(np.int64)
        iy = np.floor((fr.points[:, 1] - config.y_min) / config.cell_size).astype(np.int64)
        keep = (ix >= 0) & (ix < X) & (iy >= 0) & (iy < Y)
        cell = ix[keep] * Y + iy[keep]
        if cell.size == 0:
            continue
        pix = fr.pixel[keep]
        order = np.lexsort((fr.bin[keep], pix, cell))
        cell, pix, probs = cell[order], pix[order], fr.probs[keep][order]
        key = cell * fr.features.shape[1] + pix
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        mass = np.add.reduceat(probs, starts)
        np.add.at(flat, cell[starts], (fr.features[:, pix[starts]] * mass).T)
    return BevGrid(flat.T.reshape(C, X, Y), config)


def bev_norm(grid: BevGrid) -> np.ndarray:
    """Per-cell L2 norm over channels, (X, Y)."""
    return np.sqrt(np.sum(grid.data ** 2, axis=0))
