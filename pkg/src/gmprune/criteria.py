"""Filter selection criteria.

A layer's filters are compared as flat d-vectors (rows of a 2-D matrix,
d = in_channels * kernel**2). Two families of criteria are implemented:

* norm-based: rank filters by their l1/l2 norm, prune the smallest;
* redundancy-based: rank filters by the summed distance to all other
  filters in the layer and prune the most central ones, i.e. the filters
  whose information the remaining filters can stand in for.

All criterion math runs in 64-bit floats regardless of the 32-bit storage
format. Per-row distance sums accumulate strictly left to right, so a sum
that includes the exactly-zero self distance is bit-identical to one that
skips it, and results do not depend on the kernel backend.

Tie-breaking everywhere: stable ascending sort on (score, index); the lowest
index wins. Cosine distance is 1 - cosine similarity, in [0, 2].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .backend import kernels as _K
from .errors import (
    CountOutOfRange,
    DimensionMismatch,
    NoConvergence,
    NonFiniteValue,
    ZeroVectorCosine,
)

# Perturbation applied when a Weiszfeld iterate coincides with a data row
# but is not optimal there: shift the first coordinate by EPS*(1+|x|).
WEISZFELD_EPS = 1e-12


class DistanceKind(enum.Enum):
    L2 = "L2"
    L1 = "L1"
    COSINE = "Cosine"


class Criterion(enum.Enum):
    NORM_L1 = "NormL1"
    NORM_L2 = "NormL2"
    GM = "GM"
    MIX = "Mix"


_KIND_CODE = {
    DistanceKind.L2: _K.KIND_L2,
    DistanceKind.L1: _K.KIND_L1,
    DistanceKind.COSINE: _K.KIND_COSINE,
}


@dataclass(frozen=True)
class SelectionResult:
    """Selected filter rows plus the per-filter scores that ranked them.

    For Mix, `scores` holds the stage-one norm scores; the distance sums of
    the second stage are only defined over the surviving sub-matrix.
    """

    indices: tuple[int, ...]
    scores: np.ndarray
    criterion: Criterion


@dataclass(frozen=True)
class GmPoint:
    """Geometric-median estimate: coordinates, iteration count, final
    objective (sum of Euclidean distances) and the recorded objective
    trajectory (non-increasing)."""

    coords: np.ndarray
    iterations: int
    objective: float
    objective_history: tuple[float, ...]


def as_filter_matrix(m) -> np.ndarray:
    """Validate and convert to a C-contiguous float64 (rows, d) matrix."""
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"filter matrix must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"filter matrix must be at least 1x1, got shape {a.shape}")
    finite = np.isfinite(a)
    if not finite.all():
        raise NonFiniteValue("<matrix>", int(np.argmin(finite.ravel())))
    return a


def filter_norm(m, p: str) -> np.ndarray:
    """Per-row lp norm, p in {'l1', 'l2'}."""
    a = as_filter_matrix(m)
    if p == "l1":
        return np.sum(np.abs(a), axis=1)
    if p == "l2":
        return np.sqrt(np.einsum("ij,ij->i", a, a))
    raise ValueError(f"unsupported norm {p!r} (use 'l1' or 'l2')")


def distance_matrix(m, kind: DistanceKind, *, zero_cosine_fill: bool = False) -> np.ndarray:
    """Symmetric all-pairs distance matrix with an exactly-zero diagonal.

    Cosine distance is undefined for zero rows; by default that raises
    ZeroVectorCosine. With zero_cosine_fill a zero row is instead assigned
    the maximal distance 2.0 to every other row (the pruning schedule uses
    this so it cannot abort on filters it zeroized itself).
    """
    a = as_filter_matrix(m)
    d, first_zero = _K.pairwise_distance(a, _KIND_CODE[kind])
    if kind is DistanceKind.COSINE and first_zero >= 0 and not zero_cosine_fill:
        raise ZeroVectorCosine(first_zero)
    return d


def distance_sum(m, kind: DistanceKind, *, exclude_self: bool = False,
                 zero_cosine_fill: bool = False) -> np.ndarray:
    """g[j] = sum of distances from row j to every row (self term included).

    Because the self distance is exactly zero and rows are accumulated left
    to right, exclude_self=True returns bit-identical values; both variants
    are exposed so that identity stays testable.
    """
    d = distance_matrix(m, kind, zero_cosine_fill=zero_cosine_fill)
    return _K.row_sums(d, exclude_self)


def _check_count(count: int, rows: int) -> None:
    if not 0 <= count <= rows:
        raise CountOutOfRange(f"count {count} outside [0, {rows}]")


def _smallest(scores: np.ndarray, count: int) -> tuple[int, ...]:
    """Indices of the `count` smallest scores; ties keep the lower index."""
    order = np.argsort(scores, kind="stable")
    return tuple(sorted(int(i) for i in order[:count]))


def select_gm(m, count: int, kind: DistanceKind, *, zero_cosine_fill: bool = False) -> SelectionResult:
    """Select the `count` most redundant filters (smallest distance sum)."""
    a = as_filter_matrix(m)
    _check_count(count, a.shape[0])
    scores = distance_sum(a, kind, zero_cosine_fill=zero_cosine_fill)
    return SelectionResult(_smallest(scores, count), scores, Criterion.GM)


def select_norm(m, count: int, p: str) -> SelectionResult:
    """Select the `count` smallest-norm filters."""
    a = as_filter_matrix(m)
    _check_count(count, a.shape[0])
    scores = filter_norm(a, p)
    criterion = Criterion.NORM_L1 if p == "l1" else Criterion.NORM_L2
    return SelectionResult(_smallest(scores, count), scores, criterion)


def select_mix(m, norm_count: int, gm_count: int, p: str, kind: DistanceKind,
               *, zero_cosine_fill: bool = False) -> SelectionResult:
    """Hybrid selection: `norm_count` filters by smallest norm, then
    `gm_count` filters by distance sum recomputed over the survivors only.
    """
    a = as_filter_matrix(m)
    rows = a.shape[0]
    if norm_count < 0 or gm_count < 0 or norm_count + gm_count > rows:
        raise CountOutOfRange(
            f"norm_count {norm_count} + gm_count {gm_count} outside [0, {rows}]"
        )
    stage_one = select_norm(a, norm_count, p)
    chosen = set(stage_one.indices)
    if gm_count:
        remaining = np.array([i for i in range(rows) if i not in chosen], dtype=np.intp)
        sub_scores = distance_sum(a[remaining], kind, zero_cosine_fill=zero_cosine_fill)
        order = np.argsort(sub_scores, kind="stable")
        chosen.update(int(remaining[i]) for i in order[:gm_count])
    return SelectionResult(tuple(sorted(chosen)), stage_one.scores, Criterion.MIX)


def _objective(a: np.ndarray, x: np.ndarray) -> float:
    diff = a - x
    return float(np.sum(np.sqrt(np.einsum("ij,ij->i", diff, diff))))


def weiszfeld_gm(m, tol: float = 1e-10, max_iters: int = 1000) -> GmPoint:
    """Geometric median of the rows via Weiszfeld's fixed-point iteration.

    Starts from the arithmetic mean and stops once the objective improvement
    drops below tol*(1+objective). When an iterate coincides exactly with a
    data row, the vertex optimality condition is checked: if the pull of the
    remaining rows has norm <= 1 the row itself is the geometric median and
    is returned exactly; otherwise the iterate is perturbed by
    WEISZFELD_EPS*(1+|x|) along the first coordinate and iteration continues.

    Raises NoConvergence (with the best iterate in the payload) if max_iters
    is exhausted.
    """
    a = as_filter_matrix(m)
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = a.mean(axis=0)
    history = [_objective(a, x)]

    for iteration in range(1, max_iters + 1):
        diff = a - x
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        on_row = dist == 0.0
        if on_row.any():
            if on_row.all():  # all rows identical and x sits on them
                return GmPoint(x, iteration, history[-1], tuple(history))
            pull = np.sum(diff[~on_row] / dist[~on_row, None], axis=0)
            if float(np.sqrt(pull @ pull)) <= 1.0:
                return GmPoint(x, iteration, history[-1], tuple(history))
            x = x.copy()
            x[0] += WEISZFELD_EPS * (1.0 + float(np.sqrt(x @ x)))
            diff = a - x
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            if (dist == 0.0).any():  # pathological; keep best iterate
                return GmPoint(x, iteration, _objective(a, x), tuple(history))
        weights = 1.0 / dist
        x_new = (a * weights[:, None]).sum(axis=0) / weights.sum()
        f_new = _objective(a, x_new)
        if f_new > history[-1]:
            # floating-point plateau: the previous iterate is the fixed point
            return GmPoint(x, iteration, history[-1], tuple(history))
        improved = history[-1] - f_new
        x = x_new
        history.append(f_new)
        if improved <= tol * (1.0 + f_new):
            return GmPoint(x, iteration, f_new, tuple(history))

    best = GmPoint(x, max_iters, history[-1], tuple(history))
    raise NoConvergence(f"no convergence after {max_iters} iterations", best)


def nearest_to_point(m, x, kind: DistanceKind) -> int:
    """Index of the row closest to `x`; ties go to the lower index."""
    a = as_filter_matrix(m)
    q = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if q.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"query has length {q.shape[0]}, filters have {a.shape[1]}")
    diff = a - q
    if kind is DistanceKind.L2:
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    elif kind is DistanceKind.L1:
        dist = np.sum(np.abs(diff), axis=1)
    else:
        norms = np.sqrt(np.einsum("ij,ij->i", a, a))
        qn = float(np.sqrt(q @ q))
        if qn == 0.0:
            raise ZeroVectorCosine(-1)
        if (norms == 0.0).any():
            raise ZeroVectorCosine(int(np.argmax(norms == 0.0)))
        dist = np.clip(1.0 - (a @ q) / (norms * qn), 0.0, 2.0)
    return int(np.argmin(dist))
