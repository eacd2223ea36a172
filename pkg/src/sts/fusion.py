"""Monocular/stereo logit fusion, depth decoding and the BCE depth objective."""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ShapeError, UndefinedMetricError
from .tensors import DepthDistribution, DepthLogits

BCE_EPS = 1e-7


def softmax(logits, axis=0):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def fuse(stereo: DepthLogits, mono: DepthLogits) -> DepthDistribution:
    """Element-wise sum of the two logit tensors followed by a softmax over depth."""
    if stereo.data.shape != mono.data.shape:
        raise ShapeError(f"stereo logits {stereo.data.shape} and mono logits {mono.data.shape} differ")
    bins = stereo.bins if stereo.bins is not None else mono.bins
    if stereo.bins is not None and mono.bins is not None and not stereo.bins.same_partition(mono.bins):
        raise ShapeError("stereo and mono logits use different depth bins")
    return DepthDistribution(softmax(stereo.data + mono.data), bins, stereo.stride)


def to_distribution(logits: DepthLogits) -> DepthDistribution:
    return DepthDistribution(softmax(logits.data), logits.bins, logits.stride)


def decode_depth(dist: DepthDistribution, mode: str = "argmax") -> np.ndarray:
    centers = np.asarray(dist.bins.centers)
    if mode == "argmax":
        return centers[np.argmax(dist.probs, axis=0)]
    if mode == "expectation":
        return np.tensordot(centers, dist.probs, axes=(0, 0))
    raise DomainError(f"unknown decode mode {mode!r}")


def bce_depth_loss(dist: DepthDistribution, gt_depth, bins=None) -> float:
    """Mean binary cross-entropy between the distribution and one-hot GT bins.

    Pixels whose GT depth is missing or outside the bin range are ignored.
    """
    bins = bins if bins is not None else dist.bins
    gt_bin = bins.assign(gt_depth)
    mask = gt_bin >= 0
    if not mask.any():
        raise UndefinedMetricError("no pixel with valid ground-truth depth")
    p = np.clip(dist.probs[:, mask], BCE_EPS, 1.0 - BCE_EPS)  # (C, N)
    y = np.zeros_like(p)
    y[gt_bin[mask], np.arange(p.shape[1])] = 1.0
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(loss.mean())
