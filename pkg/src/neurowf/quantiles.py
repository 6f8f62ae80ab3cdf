"""Quantile functions on the shared level grid and the monotone refit."""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_finite_1d
from .exceptions import InvalidInput

N_LEVELS = 1025
QUANTILE_LEVELS = np.linspace(0.0, 1.0, N_LEVELS)
QUANTILE_LEVELS.setflags(write=False)


@dataclass(frozen=True)
class QuantileFunction:
    """Nondecreasing quantile values on a fixed grid of levels."""

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if levels.shape != values.shape or levels.ndim != 1:
            raise InvalidInput("levels and values must be 1-d arrays of equal length")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def invert_cdf(grid, cdf, levels=QUANTILE_LEVELS):
    """Linear-interpolation inverse of a tabulated CDF.

    Flat stretches of the CDF are collapsed to their left-most grid point, so
    the result is the generalised (left-continuous) inverse.  Levels below
    ``cdf[0]`` map to ``grid[0]``; level 1 maps to ``grid[-1]``.
    """
    grid = as_finite_1d(grid, "grid")
    cdf = as_finite_1d(cdf, "cdf")
    levels = as_finite_1d(levels, "levels")
    if grid.shape != cdf.shape:
        raise InvalidInput("grid and cdf must have the same length")
    if np.any(np.diff(cdf) < 0):
        raise InvalidInput("cdf must be nondecreasing")
    if np.any(levels < 0) or np.any(levels > 1):
        raise InvalidInput("levels must lie in [0, 1]")
    _, first = np.unique(cdf, return_index=True)
    q = np.interp(levels, cdf[first], grid[first])
    q[levels >= 1.0] = grid[-1]
    return q


def monotone_refit(q, weights=None):
    """Weighted least-squares projection onto nondecreasing sequences.

    Minimises ``sum_j w_j (q_j - r_j)^2`` subject to ``r_{j+1} >= r_j``
    with the pool-adjacent-violators algorithm.

    Parameters
    ----------
    q : array_like
        Values to project.
    weights : array_like, optional
        Positive weights; uniform when omitted.
    """
    q = as_finite_1d(q, "q")
    n = q.size
    if weights is None:
        if np.all(np.diff(q) >= 0):
            return q.copy()
        w = np.ones(n)
    else:
        w = as_finite_1d(weights, "weights")
        if w.shape != q.shape:
            raise InvalidInput("weights must match q in length")
        if np.any(w <= 0):
            raise InvalidInput("weights must be positive")
        if np.all(np.diff(q) >= 0):
            return q.copy()

    # blocks as parallel stacks: weighted mean, total weight, length
    means = np.empty(n)
    totals = np.empty(n)
    sizes = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        means[top] = q[i]
        totals[top] = w[i]
        sizes[top] = 1
        while top > 0 and means[top - 1] > means[top]:
            wt = totals[top - 1] + totals[top]
            means[top - 1] = (totals[top - 1] * means[top - 1] + totals[top] * means[top]) / wt
            totals[top - 1] = wt
            sizes[top - 1] += sizes[top]
            top -= 1
    return np.repeat(means[: top + 1], sizes[: top + 1])


def level_weights(levels=QUANTILE_LEVELS):
    """Squared-level weights ``t_j^2``, with the zero level floored.

    The floor is the squared half-spacing of the grid so every weight stays
    strictly positive.
    """
    levels = np.asarray(levels, dtype=float)
    floor = (0.5 * np.min(np.diff(levels))) ** 2 if levels.size > 1 else 1.0
    return np.maximum(levels**2, floor)


def _resolve_weights(weights, levels):
    if weights is None or (isinstance(weights, str) and weights == "uniform"):
        return None
    if isinstance(weights, str):
        if weights == "level":
            return level_weights(levels)
        raise InvalidInput(f"unknown weights option {weights!r}")
    return np.asarray(weights, dtype=float)


def quantile_from_cdf(grid, cdf, levels=QUANTILE_LEVELS, weights="uniform"):
    """Invert a CDF on ``levels`` and refit to a nondecreasing sequence."""
    levels = np.asarray(levels, dtype=float)
    q = invert_cdf(grid, cdf, levels)
    return QuantileFunction(levels, monotone_refit(q, _resolve_weights(weights, levels)))


class QuantileTransformer(TransformerMixin, BaseEstimator):
    """Map a collection of raw samples to a matrix of quantile functions.

    ``transform`` accepts a sequence of 1-d samples (one per subject, lengths
    may differ) and returns an ``(n_subjects, n_levels)`` array.  Fitting is
    stateless.

    Parameters
    ----------
    n_grid : int, default=4096
    pad_fraction : float, default=0.1
    weights : {"uniform", "level"}, default="uniform"
        Weights of the monotone refit.
    levels : array_like, optional
        Quantile levels; 0, 1/1024, ..., 1 when omitted.
    """

    def __init__(self, n_grid=4096, pad_fraction=0.1, weights="uniform", levels=None):
        self.n_grid = n_grid
        self.pad_fraction = pad_fraction
        self.weights = weights
        self.levels = levels

    def fit(self, X, y=None):
        self.levels_ = QUANTILE_LEVELS if self.levels is None else np.asarray(self.levels, float)
        self.n_features_out_ = self.levels_.size
        return self

    def transform(self, X):
        from .kde import estimate_subject

        if not hasattr(self, "levels_"):
            self.fit(X)
        rows = []
        self.converged_ = []
        for sample in X:
            est = estimate_subject(sample, self.n_grid, self.pad_fraction)
            qf = quantile_from_cdf(est.grid, est.cdf, self.levels_, self.weights)
            rows.append(qf.values)
            self.converged_.append(est.bandwidth.converged)
        if not rows:
            return np.empty((0, self.levels_.size))
        return np.vstack(rows)
