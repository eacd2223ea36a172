"""Tensor containers passed between pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hypotheses import DepthHypothesisSet


@dataclass
class FeatureMap:
    """Per-camera feature grid, ``data`` shaped (C_F, H', W')."""

    data: np.ndarray
    stride: int
    camera_id: str
    timestamp: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"feature map must be (C, H, W), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape[1:]


@dataclass
class WarpedVolume:
    """``data`` (C_F, D, H', W'); ``valid_count`` (D, H', W') contributing sources."""

    data: np.ndarray
    valid_count: np.ndarray


@dataclass
class CostVolume:
    data: np.ndarray  # (G, D, H', W')
    valid_count: Optional[np.ndarray] = None

    @property
    def groups(self) -> int:
        return self.data.shape[0]


@dataclass
class DepthLogits:
    """Pre-softmax depth scores (C, H_m, W_m) at image stride ``stride``."""

    data: np.ndarray
    stride: int
    bins: Optional[DepthHypothesisSet] = None

    @property
    def count(self) -> int:
        return self.data.shape[0]


@dataclass
class DepthDistribution:
    probs: np.ndarray  # (C_D, H_m, W_m)
    bins: DepthHypothesisSet
    stride: int = 1
