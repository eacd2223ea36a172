"""Depth evaluation: SILog, range-binned reductions and bin accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import DomainError, UndefinedMetricError

DEFAULT_RANGE_EDGES = (2.0, 10.0, 20.0, 30.0, 45.0, 58.0)


@dataclass(frozen=True)
class RangeBins:
    edges: Tuple[float, ...] = DEFAULT_RANGE_EDGES

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise DomainError(f"range edges must be strictly increasing, got {self.edges}")

    def labels(self):
        return [f"{lo:g}-{hi:g}" for lo, hi in zip(self.edges[:-1], self.edges[1:])]

    def masks(self, gt):
        gt = np.asarray(gt)
        out = []
        for lo, hi in zip(self.edges[:-1], self.edges[1:]):
            out.append((gt >= lo) & (gt < hi))
        return out


def silog(pred, gt, mask=None) -> float:
    """Scale-invariant log error, ``100 * sqrt(mean(d^2) - mean(d)^2)`` with ``d = ln pred - ln gt``."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if mask is None:
        mask = gt > 0
    mask = np.asarray(mask, dtype=bool) & (gt > 0) & (pred > 0)
    if not mask.any():
        raise UndefinedMetricError("SILog over an empty pixel set")
    d = np.log(pred[mask]) - np.log(gt[mask])
    var = np.mean(d * d) - np.mean(d) ** 2
    return float(100.0 * np.sqrt(max(var, 0.0)))


def abs_error(pred, gt, mask=None) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if mask is None:
        mask = gt > 0
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise UndefinedMetricError("mean absolute error over an empty pixel set")
    return float(np.mean(np.abs(pred[mask] - gt[mask])))


def range_binned(metric: Callable, pred, gt, bins: Optional[RangeBins] = None,
                 mask=None) -> Dict[str, float]:
    """Evaluate ``metric(pred, gt, mask)`` per GT range ``[edge_i, edge_i+1)``.

    Empty ranges are left out of the result.
    """
    bins = bins or RangeBins()
    gt = np.asarray(gt, dtype=np.float64)
    base = gt > 0 if mask is None else (np.asarray(mask, dtype=bool) & (gt > 0))
    out = {}
    for label, m in zip(bins.labels(), bins.masks(gt)):
        m = m & base
        if m.any():
            out[label] = metric(pred, gt, m)
    return out


def range_counts(gt, bins: Optional[RangeBins] = None, mask=None) -> Dict[str, int]:
    bins = bins or RangeBins()
    gt = np.asarray(gt, dtype=np.float64)
    base = gt > 0 if mask is None else (np.asarray(mask, dtype=bool) & (gt > 0))
    return {label: int((m & base).sum()) for label, m in zip(bins.labels(), bins.masks(gt))}


def bin_accuracy(dist, gt_depth, tolerance_bins: int = 1, mask=None) -> float:
    """Fraction of pixels whose argmax bin lies within ``tolerance_bins`` of the GT bin."""
    gt_bin = dist.bins.assign(gt_depth)
    valid = gt_bin >= 0
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    if not valid.any():
        raise UndefinedMetricError("bin accuracy over an empty pixel set")
    pred_bin = np.argmax(dist.probs, axis=0)
    hit = np.abs(pred_bin - gt_bin) <= tolerance_bins
    return float(hit[valid].mean())
