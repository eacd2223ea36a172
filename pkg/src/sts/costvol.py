"""Group-wise correlation cost volume and the stereo depth head."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, DataFormatError, ResolutionError, ShapeError
from .geometry import CameraModel, EgoPose
from .hypotheses import expand_bins, make_bins
from .sweep import SourceView, build_warped_volume
from .tensors import CostVolume, DepthLogits, FeatureMap, WarpedVolume

DEFAULT_GROUPS = 8


def group_correlation(ref: FeatureMap, warped: WarpedVolume, groups: int = DEFAULT_GROUPS) -> CostVolume:
    """Per-group mean of channel products between reference and warped features.

    ``S[g, d, y, x] = (G / C_F) * <ref[g-th channels, y, x], warped[g-th channels, d, y, x]>``.
    Cells without a valid source are zero.
    """
    C = ref.channels
    if groups < 1 or C % groups:
        raise ConfigurationError(f"{groups} groups do not divide {C} feature channels")
    if warped.data.shape[0] != C or warped.data.shape[2:] != ref.shape:
        raise ShapeError(f"warped volume {warped.data.shape} does not match reference {ref.data.shape}")
    _, D, H, W = warped.data.shape
    per = C // groups
    ref_g = ref.data.reshape(groups, per, 1, H, W)
    warped_g = warped.data.reshape(groups, per, D, H, W)
    cost = np.einsum("gcdyx,gcdyx->gdyx", np.broadcast_to(ref_g, warped_g.shape), warped_g) / per
    cost[:, warped.valid_count == 0] = 0.0
    return CostVolume(cost, warped.valid_count)


@dataclass
class RegularizerWeights:
    """Chain of 1x1x1 convolutions: ``layers[i] = (weight (out, in), bias (out,))``.

    ReLU is applied between consecutive layers, not after the last one.
    """

    layers: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        fixed = []
        for i, (w, b) in enumerate(self.layers):
            w = np.atleast_2d(np.asarray(w, dtype=np.float64))
            b = np.asarray(b, dtype=np.float64).reshape(-1)
            if b.shape[0] != w.shape[0]:
                raise ConfigurationError(f"layer {i}: bias length {b.shape[0]} != {w.shape[0]} outputs")
            if i > 0 and w.shape[1] != fixed[-1][0].shape[0]:
                raise ConfigurationError(f"layer {i}: expects {w.shape[1]} inputs, previous layer gives {fixed[-1][0].shape[0]}")
            fixed.append((w, b))
        if fixed and fixed[-1][0].shape[0] != 1:
            raise ConfigurationError("the last regularizer layer must have a single output channel")
        self.layers = fixed

    @property
    def in_channels(self) -> int:
        return self.layers[0][0].shape[1]

    @classmethod
    def random(cls, channels: Sequence[int], seed: int = 0) -> "RegularizerWeights":
        rng = np.random.default_rng(seed)
        layers = []
        for cin, cout in zip(channels[:-1], channels[1:]):
            layers.append((rng.normal(0, 1 / np.sqrt(cin), (cout, cin)), rng.normal(0, 0.1, cout)))
        return cls(layers)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<I", len(self.layers)))
            for w, b in self.layers:
                fh.write(struct.pack("<II", w.shape[1], w.shape[0]))
                fh.write(w.astype("<f4").tobytes())
                fh.write(b.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "RegularizerWeights":
        """Read the binary head layout.

        ``u32 layer_count``, then per layer ``u32 in, u32 out``, ``out*in`` f32
        weights (row-major, one row per output channel), ``out`` f32 biases.
        All values little-endian.
        """
        with open(path, "rb") as fh:
            raw = fh.read()
        pos = 0

        def take(nbytes):
            nonlocal pos
            if pos + nbytes > len(raw):
                raise DataFormatError(f"{path}: truncated regularizer file", offset=pos)
            chunk = raw[pos:pos + nbytes]
            pos += nbytes
            return chunk

        (n_layers,) = struct.unpack("<I", take(4))
        layers = []
        for _ in range(n_layers):
            cin, cout = struct.unpack("<II", take(8))
            w = np.frombuffer(take(4 * cin * cout), dtype="<f4").reshape(cout, cin)
            b = np.frombuffer(take(4 * cout), dtype="<f4")
            layers.append((w.astype(np.float64), b.astype(np.float64)))
        if pos != len(raw):
            raise DataFormatError(f"{path}: trailing bytes after regularizer layers", offset=pos)
        return cls(layers)


def regularize(volume: CostVolume, head: Optional[RegularizerWeights] = None, stride: int = 1, bins=None) -> DepthLogits:
    """Collapse the group axis to one logit per (depth, pixel).

    Without a head the groups are averaged.
    """
    x = volume.data
    if head is None:
        return DepthLogits(x.mean(axis=0), stride, bins)
    if head.in_channels != volume.groups:
        raise ConfigurationError(f"head expects {head.in_channels} input channels, cost volume has {volume.groups}")
    G, D, H, W = x.shape
    h = x.reshape(G, -1)
    for i, (w, b) in enumerate(head.layers):
        h = w @ h + b[:, None]
        if i < len(head.layers) - 1:
            h = np.maximum(h, 0.0)
    return DepthLogits(h.reshape(D, H, W), stride, bins)


def pool_to_output(logits: DepthLogits, target_stride: int) -> DepthLogits:
    """Non-overlapping average pooling from stride n to stride m (m a multiple of n)."""
    n = logits.stride
    if target_stride < n or target_stride % n:
        raise ResolutionError(f"output stride {target_stride} is not a multiple of {n}")
    f = target_stride // n
    if f == 1:
        return DepthLogits(logits.data.copy(), n, logits.bins)
    C, H, W = logits.data.shape
    if H % f or W % f:
        raise ResolutionError(f"{H}x{W} logits do not tile into {f}x{f} blocks")
    pooled = logits.data.reshape(C, H // f, f, W // f, f).mean(axis=(2, 4))
    return DepthLogits(pooled, target_stride, logits.bins)


@dataclass
class StereoConfig:
    depth_mode: str = "sid"
    d_min: float = 2.0
    d_max: float = 58.0
    bins: int = 112
    stereo_bins: int = 56
    sweep_mode: str = "surround"
    groups: int = DEFAULT_GROUPS
    output_stride: int = 4
    head: Optional[RegularizerWeights] = None

    @property
    def stereo_hypotheses(self):
        return make_bins(self.depth_mode, self.d_min, self.d_max, self.stereo_bins)


@dataclass
class StereoResult:
    logits: DepthLogits  # C_D bins at the output stride
    stereo_logits: DepthLogits  # C_D' bins at the feature stride
    valid_count: np.ndarray  # (C_D', H', W')


def stereo_pipeline(ref_cam: CameraModel, ref_ego: EgoPose, ref_features: FeatureMap,
                    sources: Sequence[SourceView], config: StereoConfig) -> StereoResult:
    hyps = config.stereo_hypotheses
    warped = build_warped_volume(ref_cam, ref_ego, ref_features, sources, hyps, config.sweep_mode)
    cost = group_correlation(ref_features, warped, config.groups)
    del warped
    raw = regularize(cost, config.head, stride=ref_features.stride, bins=hyps)
    pooled = pool_to_output(raw, config.output_stride)
    final = expand_bins(pooled, config.bins)
    return StereoResult(final, raw, cost.valid_count)
