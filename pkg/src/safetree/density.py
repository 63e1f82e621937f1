"""One-dimensional density machinery for split search.

Per dimension: Gaussian KDE on a uniform grid, mode detection with a
relative floor, mode-based interval partitioning, and a width-fraction
impurity score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import DomainError

SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class DensityCurve:
    """Density estimate sampled on a uniform ascending grid."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or grid.shape != dens.shape:
            raise DomainError("grid and density must be 1-D arrays of equal length")
        steps = np.diff(grid)
        if len(steps) and not np.all(steps > 0):
            raise DomainError("grid must be strictly increasing")
        if np.any(dens < 0):
            raise DomainError("density values must be non-negative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)


@dataclass(frozen=True)
class IntervalSet:
    """Ordered, non-overlapping intervals along one dimension.

    Adjacent intervals may share an endpoint (they tile a range); interiors
    never overlap.
    """

    intervals: tuple[tuple[float, float], ...]
    dim: int

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise DomainError("IntervalSet needs at least one interval")
        for lo, hi in ivs:
            if lo > hi:
                raise DomainError(f"interval [{lo}, {hi}] has lo > hi")
        for (_, r), (l2, _) in zip(ivs, ivs[1:]):
            if l2 < r:
                raise DomainError("intervals must be sorted and non-overlapping")
        object.__setattr__(self, "intervals", ivs)

    def __len__(self) -> int:
        return len(self.intervals)


def bandwidth_silverman(samples) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(sd, IQR/1.34) * n^(-1/5).

    Falls back to the sd alone when the IQR is zero, and to
    1e-3 * (max - min + 1) when the sd is zero.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DomainError("bandwidth needs at least 2 samples")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return 1e-3 * (float(x.max()) - float(x.min()) + 1.0)
    q75, q25 = np.percentile(x, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = sd if iqr == 0.0 else min(sd, iqr / 1.34)
    return 0.9 * spread * x.size ** (-0.2)


def kde_estimate(samples, bandwidth: float, grid_size: int = 256) -> DensityCurve:
    """Gaussian KDE evaluated on `grid_size` points over [min-3h, max+3h]."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1:
        raise DomainError("kde needs at least 1 sample")
    if bandwidth <= 0:
        raise DomainError("bandwidth must be positive")
    if grid_size < 16:
        raise DomainError("grid size must be at least 16")
    h = float(bandwidth)
    lo = float(x.min()) - 3.0 * h
    hi = float(x.max()) + 3.0 * h
    grid = np.linspace(lo, hi, grid_size)
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * SQRT_2PI)
    return DensityCurve(grid=grid, density=dens, bandwidth=h)


def detect_modes(curve: DensityCurve, rel_floor: float = 0.05) -> list[int]:
    """Grid indices of the prominent local maxima of the curve.

    A maximum counts only if both its height and its topographic prominence
    reach `rel_floor` times the curve maximum, which suppresses sampling
    wiggle on plateaus. Endpoints qualify when strictly above their single
    neighbour. At least one index (the argmax) is returned whenever the
    curve is not identically zero.
    """
    dens = curve.density
    peak = float(dens.max())
    if peak <= 0.0:
        return []
    floor = rel_floor * peak
    # Pad so endpoints can qualify and prominences are measured to the base.
    padded = np.concatenate(([-peak], dens, [-peak]))
    idx, _ = find_peaks(padded, height=floor, prominence=floor)
    modes = [int(i - 1) for i in idx]
    if not modes:
        modes = [int(np.argmax(dens))]
    return modes


def _cut_indices(curve: DensityCurve, modes: list[int]) -> list[int]:
    """Argmin of the density strictly between consecutive modes (ties: leftmost)."""
    cuts = []
    for a, b in zip(modes, modes[1:]):
        if b - a < 2:
            cuts.append(a + 1 if a + 1 < b else a)
            continue
        seg = curve.density[a + 1 : b]
        cuts.append(a + 1 + int(np.argmin(seg)))
    return cuts


def _assign_segments(samples: np.ndarray, cut_values: np.ndarray) -> np.ndarray:
    # A sample equal to a cut goes to the left segment.
    return np.searchsorted(cut_values, samples, side="left")


def partition_intervals(samples, curve: DensityCurve, modes, dim: int) -> IntervalSet:
    """Split samples at the density minima between modes; one interval per
    non-empty segment, snapped to the extremes of its assigned samples."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("cannot partition an empty sample set")
    modes = sorted(int(m) for m in modes)
    if not modes:
        raise DomainError("need at least one mode")
    cut_values = curve.grid[_cut_indices(curve, modes)]
    seg = _assign_segments(x, cut_values)
    intervals = []
    for s in range(len(modes)):
        inside = x[seg == s]
        if inside.size:
            intervals.append((float(inside.min()), float(inside.max())))
    return IntervalSet(intervals=tuple(intervals), dim=dim)


def partition_with_cuts(samples, curve: DensityCurve, modes, dim: int):
    """Like partition_intervals but also returns the cut positions that
    separate the returned intervals (len = number of intervals - 1)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("cannot partition an empty sample set")
    modes = sorted(int(m) for m in modes)
    if not modes:
        raise DomainError("need at least one mode")
    cut_values = curve.grid[_cut_indices(curve, modes)]
    seg = _assign_segments(x, cut_values)
    intervals = []
    kept_cuts = []
    for s in range(len(modes)):
        inside = x[seg == s]
        if inside.size:
            if intervals:
                kept_cuts.append(float(cut_values[s - 1]))
            intervals.append((float(inside.min()), float(inside.max())))
    # When empty segments are dropped, cut_values[s-1] still separates the
    # surviving neighbours: samples left of it belong to earlier segments.
    return IntervalSet(intervals=tuple(intervals), dim=dim), kept_cuts


def impurity(intervals: IntervalSet, parent_lo: float, parent_hi: float) -> float:
    """Fraction of the parent extent covered by the intervals (lower = tighter)."""
    width = float(parent_hi) - float(parent_lo)
    if width <= 0:
        raise DomainError("parent range must have positive width")
    for lo, hi in intervals.intervals:
        if lo < parent_lo - 1e-12 or hi > parent_hi + 1e-12:
            raise DomainError("interval outside parent range")
    covered = sum(hi - lo for lo, hi in intervals.intervals)
    return covered / width
