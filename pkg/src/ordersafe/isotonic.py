"""Weighted isotonic regression and order-consistency checkers.

Provides the pool-adjacent-violators projection onto the nondecreasing
cone, the equivalent min-max block-average formula (kept as an independent
reference implementation), and the split conditions that characterize when
a distance test against the simple, tree, or umbrella order separates the
null from the fitted alternative. All indices in this module are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError


@dataclass(frozen=True)
class WeightedSeries:
    """Observed values with strictly positive weights (e.g. group sizes / n)."""

    values: np.ndarray
    weights: np.ndarray

    def __init__(self, values, weights=None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ContractViolationError("values must be a nonempty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise ContractViolationError("values must be finite")
        if weights is None:
            weights = np.ones_like(values)
        else:
            weights = np.asarray(weights, dtype=float)
        if weights.shape != values.shape:
            raise ContractViolationError("weights must match values in length")
        if not np.all(weights > 0):
            raise ContractViolationError("weights must be strictly positive")
        values = values.copy()
        weights = weights.copy()
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class IsotonicFit:
    """Result of the weighted projection onto the nondecreasing cone.

    blocks lists the maximal constant level sets as half-open (start, stop)
    index ranges; within each block the fitted value is the weighted average
    of the raw values, and the overall weighted mean is preserved.
    """

    fitted: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    objective: float


def av(series: WeightedSeries, u: int, v: int) -> float:
    """Weighted average of values[u..v], endpoints included (0-based)."""
    k = len(series)
    if not 0 <= u <= v < k:
        raise ContractViolationError(f"indices ({u}, {v}) out of range for length {k}")
    w = series.weights[u : v + 1]
    return float(w @ series.values[u : v + 1] / w.sum())


def pava(series: WeightedSeries) -> IsotonicFit:
    """Weighted least-squares projection onto the nondecreasing cone.

    Stack-based adjacent pooling, O(K). Agrees coordinate-wise with
    minmax_project; that equivalence is enforced by the test suite rather
    than assumed here.
    """
    values, weights = series.values, series.weights
    # each stack entry: [start, stop, weight sum, weighted mean]
    stack: list[list] = []
    for i, (v, w) in enumerate(zip(values, weights)):
        stack.append([i, i + 1, w, v])
        while len(stack) > 1 and stack[-2][3] >= stack[-1][3]:
            hi = stack.pop()
            lo = stack.pop()
            wsum = lo[2] + hi[2]
            mean = (lo[2] * lo[3] + hi[2] * hi[3]) / wsum
            stack.append([lo[0], hi[1], wsum, mean])
    fitted = np.empty_like(values)
    blocks: list[tuple[int, int]] = []
    tol = 1e-12 * (1.0 + np.max(np.abs(values)))
    for start, stop, _, mean in stack:
        fitted[start:stop] = mean
        # pooling merges on >=, so adjacent equal means are already one block;
        # guard against float ties splitting a maximal level set anyway
        if blocks and abs(fitted[blocks[-1][0]] - mean) <= tol:
            blocks[-1] = (blocks[-1][0], stop)
        else:
            blocks.append((start, stop))
    objective = float(weights @ (values - fitted) ** 2)
    return IsotonicFit(fitted=fitted, blocks=tuple(blocks), objective=objective)


def minmax_project(series: WeightedSeries) -> np.ndarray:
    """Coordinate-wise min over t >= i of max over s <= i of Av(s, t).

    O(K^2) reference implementation of the same projection as pava, kept
    independent so the two can check each other.
    """
    values, weights = series.values, series.weights
    k = len(series)
    cw = np.concatenate(([0.0], np.cumsum(weights)))
    cwv = np.concatenate(([0.0], np.cumsum(weights * values)))

    def block_av(s, t):  # inclusive endpoints
        return (cwv[t + 1] - cwv[s]) / (cw[t + 1] - cw[s])

    out = np.empty(k)
    for i in range(k):
        best = np.inf
        for t in range(i, k):
            inner_max = max(block_av(s, t) for s in range(i + 1))
            best = min(best, inner_max)
        out[i] = best
    return out


@dataclass(frozen=True)
class SplitCheck:
    """Outcome of the simple-order split condition.

    witness is the smallest 0-based index i such that every left block
    average over [s..i] stays strictly below every right block average over
    [i+1..t]; None when no such split exists.
    """

    consistent: bool
    witness: int | None


def simple_order_consistency(series: WeightedSeries) -> SplitCheck:
    """Strict split condition for the simple (nondecreasing) order.

    True iff for some i the means separate into at least two level sets:
    max_{s<=i} Av(s, i) < min_{t>=i+1} Av(i+1, t). The inequality is strict
    with no tolerance slack; ties count as "no split".
    """
    k = len(series)
    if k < 2:
        raise ContractViolationError("need at least two groups")
    for i in range(k - 1):
        left = max(av(series, s, i) for s in range(i + 1))
        right = min(av(series, i + 1, t) for t in range(i + 1, k))
        if left < right:
            return SplitCheck(consistent=True, witness=i)
    return SplitCheck(consistent=False, witness=None)


def tree_order_consistency(theta) -> bool:
    """True iff theta_0 < max(theta_1, ..., theta_{K-1})."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size < 2:
        raise ContractViolationError("need a 1-d vector with at least two groups")
    return bool(theta[0] < np.max(theta[1:]))


@dataclass(frozen=True)
class UmbrellaCheck:
    consistent: bool
    branch: str | None  # "up", "down", or None


def umbrella_consistency(series: WeightedSeries, peak: int) -> UmbrellaCheck:
    """Split condition for the umbrella order with the given 0-based peak.

    Fires if the up branch (theta_0..theta_peak) admits a simple-order split,
    or the down branch (theta_peak..theta_{K-1}) admits the reversed split
    min_{s<=i} Av(s, i) > max_{t>=i+1} Av(i+1, t) for some peak <= i <= K-2.
    The up branch is checked first and reported when both fire.
    """
    k = len(series)
    if not 0 <= peak < k:
        raise ContractViolationError(f"peak {peak} out of range 0..{k - 1}")
    for i in range(peak):
        left = max(av(series, s, i) for s in range(i + 1))
        right = min(av(series, i + 1, t) for t in range(i + 1, peak + 1))
        if left < right:
            return UmbrellaCheck(consistent=True, branch="up")
    for i in range(peak, k - 1):
        left = min(av(series, s, i) for s in range(peak, i + 1))
        right = max(av(series, i + 1, t) for t in range(i + 1, k))
        if left > right:
            return UmbrellaCheck(consistent=True, branch="down")
    return UmbrellaCheck(consistent=False, branch=None)
