"""Depth hypotheses: uniform (UD) and log-spaced (SID) discretization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DomainError

DEFAULT_MIN_DEPTH = 2.0
DEFAULT_MAX_DEPTH = 58.0
DEFAULT_BINS = 112
DEFAULT_STEREO_BINS = 56
MODES = ("ud", "sid")


@dataclass(frozen=True, eq=False)
class DepthHypothesisSet:
    centers: np.ndarray
    mode: str
    d_min: float
    d_max: float

    @property
    def count(self) -> int:
        return len(self.centers)

    def __len__(self):
        return len(self.centers)

    def with_count(self, count: int) -> "DepthHypothesisSet":
        return make_bins(self.mode, self.d_min, self.d_max, count)

    def same_partition(self, other: "DepthHypothesisSet") -> bool:
        return (
            self.mode == other.mode
            and self.count == other.count
            and self.d_min == other.d_min
            and self.d_max == other.d_max
        )

    def to_axis(self, depth):
        """Map depths onto the axis in which this set is uniformly spaced."""
        depth = np.asarray(depth, dtype=np.float64)
        if self.mode == "sid":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(depth)
        return depth

    def assign(self, depth):
        """Index of the nearest bin center (log axis for SID, linear for UD).

        Depths outside ``[d_min, d_max]`` or non-positive map to -1.
        """
        depth = np.asarray(depth, dtype=np.float64)
        lo, hi = self.to_axis(self.d_min), self.to_axis(self.d_max)
        with np.errstate(invalid="ignore"):
            inside = np.isfinite(depth) & (depth >= self.d_min) & (depth <= self.d_max)
            x = self.to_axis(np.where(inside, depth, self.d_min))
        # bin k covers [lo + k*step, lo + (k+1)*step); nearest center == containing bin
        idx = np.floor((x - lo) / (hi - lo) * self.count).astype(np.int64)
        idx = np.clip(idx, 0, self.count - 1)
        return np.where(inside, idx, -1)


def _check(d_min, d_max, count):
    if not (np.isfinite(d_min) and np.isfinite(d_max) and 0 < d_min < d_max):
        raise DomainError(f"need 0 < d_min < d_max, got [{d_min}, {d_max}]")
    if int(count) != count or count < 1:
        raise DomainError(f"bin count must be a positive integer, got {count}")


def sid_depth(d_min, d_max, count, k):
    """Log-space partition point ``k`` (may be fractional) of ``count`` intervals."""
    k = np.asarray(k, dtype=np.float64)
    return np.exp(np.log(d_min) + np.log(d_max / d_min) * k / count)


def ud_depth(d_min, d_max, count, k):
    k = np.asarray(k, dtype=np.float64)
    return d_min + (d_max - d_min) * k / count


def make_sid(d_min: float = DEFAULT_MIN_DEPTH, d_max: float = DEFAULT_MAX_DEPTH,
             count: int = DEFAULT_BINS) -> DepthHypothesisSet:
    _check(d_min, d_max, count)
    centers = sid_depth(d_min, d_max, count, np.arange(count) + 0.5)
    return DepthHypothesisSet(centers, "sid", float(d_min), float(d_max))


def make_ud(d_min: float = DEFAULT_MIN_DEPTH, d_max: float = DEFAULT_MAX_DEPTH,
            count: int = DEFAULT_BINS) -> DepthHypothesisSet:
    _check(d_min, d_max, count)
    centers = ud_depth(d_min, d_max, count, np.arange(count) + 0.5)
    return DepthHypothesisSet(centers, "ud", float(d_min), float(d_max))


def make_bins(mode, d_min=DEFAULT_MIN_DEPTH, d_max=DEFAULT_MAX_DEPTH, count=DEFAULT_BINS):
    if mode == "sid":
        return make_sid(d_min, d_max, count)
    if mode == "ud":
        return make_ud(d_min, d_max, count)
    raise DomainError(f"unknown depth mode {mode!r}; expected one of {MODES}")


def expand_bins(stereo_logits, target_count: int):
    """Repeat each stereo depth logit ``target_count / C_D'`` times along depth."""
    from .tensors import DepthLogits

    count = stereo_logits.count
    if target_count < count or target_count % count != 0:
        raise AlignmentError(f"cannot expand {count} depth bins to {target_count}: not a multiple")
    factor = target_count // count
    bins = stereo_logits.bins.with_count(target_count) if stereo_logits.bins is not None else None
    data = np.repeat(stereo_logits.data, factor, axis=0)
    return DepthLogits(data, stereo_logits.stride, bins)
