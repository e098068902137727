"""Per-layer norm-distribution statistics and density estimates.

The norm-based pruning criterion is only trustworthy when (a) the filter
norms spread over a wide enough interval to place a threshold in, and
(b) the smallest norms are actually close to zero. `check_requirements`
turns those two conditions into deterministic flags on configurable
thresholds; `kde_estimate` produces the smooth density curve used to
eyeball a layer's norm distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criteria import as_filter_matrix, filter_norm
from .errors import EmptyInput

SQRT_2PI = float(np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class NormStats:
    """Summary of one layer's filter-norm distribution.

    v1/v2 are the minimum/maximum norm, std is the sample standard
    deviation (n-1 denominator, 0 for a single filter), span = v2 - v1.
    """

    layer: str
    norms: np.ndarray
    v1: float
    v2: float
    mean: float
    std: float
    span: float


@dataclass(frozen=True)
class KdeCurve:
    """Gaussian-kernel density estimate sampled on a uniform grid."""

    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


@dataclass(frozen=True)
class RequirementReport:
    """Deterministic flags for the two norm-criterion preconditions.

    small_deviation: std/mean strictly below the deviation threshold
    (norms concentrated in a narrow band). large_minimum: v1/v2 strictly
    above the minimum threshold (even the smallest filter is far from
    zero). Either flag raised means the norm criterion is on thin ice for
    that layer. Zero mean / zero v2 define the corresponding ratio as 0.
    """

    layer: str
    small_deviation: bool
    large_minimum: bool
    deviation_ratio: float
    minimum_ratio: float


def compute_norm_stats(m, p: str, layer: str = "") -> NormStats:
    """Norm-distribution summary of a filter matrix."""
    a = as_filter_matrix(m)
    norms = filter_norm(a, p)
    n = norms.shape[0]
    mean = float(np.mean(norms))
    std = 0.0 if n == 1 else float(np.std(norms, ddof=1))
    v1 = float(np.min(norms))
    v2 = float(np.max(norms))
    return NormStats(layer=layer, norms=norms, v1=v1, v2=v2, mean=mean, std=std, span=v2 - v1)


def silverman_bandwidth(values: np.ndarray) -> float:
    """Robust Silverman rule: 0.9 * min(std, IQR/1.34) * n^(-1/5).

    Quantiles use linear interpolation (type 7). A zero candidate is
    skipped (an all-equal IQR would otherwise zero out the bandwidth);
    when std and IQR are both zero the fallback 1e-3*(1+|mean|) applies.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    std = 0.0 if n == 1 else float(np.std(values, ddof=1))
    q75, q25 = np.quantile(values, [0.75, 0.25])
    iqr = float(q75 - q25)
    candidates = [c for c in (std, iqr / 1.34) if c > 0.0]
    if not candidates:
        return 1e-3 * (1.0 + abs(float(np.mean(values))))
    return 0.9 * min(candidates) * n ** (-1.0 / 5.0)


def kde_estimate(norms, grid_points: int, bandwidth: float | None = None) -> KdeCurve:
    """Gaussian KDE of a norm sample on a uniform grid spanning
    [min - 3h, max + 3h]."""
    values = np.asarray(norms, dtype=np.float64).ravel()
    if values.shape[0] == 0:
        raise EmptyInput("kde requires at least one observation")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    if bandwidth is None:
        h = silverman_bandwidth(values)
    else:
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        h = float(bandwidth)
    grid = np.linspace(values.min() - 3.0 * h, values.max() + 3.0 * h, grid_points)
    z = (grid[:, None] - values[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (values.shape[0] * h * SQRT_2PI)
    return KdeCurve(grid=grid, density=density, bandwidth=h)


def check_requirements(stats: NormStats, deviation_threshold: float = 0.25,
                       minimum_threshold: float = 0.3) -> RequirementReport:
    """Evaluate the two norm-criterion preconditions against thresholds.

    Both comparisons are strict, so ratios landing exactly on a threshold
    reproducibly leave the flag down.
    """
    if not 0.0 < deviation_threshold < 1.0 or not 0.0 < minimum_threshold < 1.0:
        raise ValueError("thresholds must lie in (0, 1)")
    deviation_ratio = 0.0 if stats.mean == 0.0 else stats.std / stats.mean
    minimum_ratio = 0.0 if stats.v2 == 0.0 else stats.v1 / stats.v2
    return RequirementReport(
        layer=stats.layer,
        small_deviation=deviation_ratio < deviation_threshold,
        large_minimum=minimum_ratio > minimum_threshold,
        deviation_ratio=deviation_ratio,
        minimum_ratio=minimum_ratio,
    )
