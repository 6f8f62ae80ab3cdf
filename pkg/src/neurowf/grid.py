"""Binning onto a uniform grid and the unnormalised DCT pair used by the KDE.

Conventions
-----------
``dct2`` computes ``y_k = 2 * sum_j x_j cos(pi k (2j + 1) / (2N))`` with no
orthonormal scaling, and ``dct3`` is its exact inverse.  The squared
coefficients used by the bandwidth selector are ``a_k = (y_k / 2) ** 2``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from ._validation import as_finite_1d, check_power_of_two
from .exceptions import InvalidInput

DEFAULT_N_GRID = 4096
DEFAULT_PAD_FRACTION = 0.1


@dataclass(frozen=True)
class BinnedData:
    """Relative bin frequencies of one sample on ``[lo, hi]``."""

    lo: float
    hi: float
    n_grid: int
    counts: np.ndarray
    n_samples: int

    @property
    def data_range(self):
        return self.hi - self.lo

    @property
    def bin_width(self):
        return (self.hi - self.lo) / self.n_grid

    @property
    def centers(self):
        return self.lo + (np.arange(self.n_grid) + 0.5) * self.bin_width


def bin_samples(samples, n_grid=DEFAULT_N_GRID, pad_fraction=DEFAULT_PAD_FRACTION):
    """Histogram ``samples`` onto ``n_grid`` equal-width bins.

    The grid spans the sample range widened by ``pad_fraction`` of the range
    on each side.  A degenerate sample (all values equal) is treated as if
    its range were 1.

    Parameters
    ----------
    samples : array_like
        Raw observations, all finite.
    n_grid : int
        Number of bins; a power of two, at least 64.
    pad_fraction : float
        Non-negative fraction of the range added below and above.

    Returns
    -------
    BinnedData
    """
    x = as_finite_1d(samples, "samples")
    n_grid = check_power_of_two(n_grid, "n_grid")
    if n_grid < 4:
        raise InvalidInput("n_grid must be at least 4")
    pad_fraction = float(pad_fraction)
    if not np.isfinite(pad_fraction) or pad_fraction < 0:
        raise InvalidInput(f"pad_fraction must be >= 0, got {pad_fraction}")

    xmin, xmax = float(x.min()), float(x.max())
    span = xmax - xmin
    if span <= 0:
        span = 1.0
    lo = xmin - pad_fraction * span
    hi = xmax + pad_fraction * span
    if hi <= lo:
        # only reachable with pad_fraction == 0 on degenerate data
        lo, hi = xmin - 0.5, xmax + 0.5

    idx = np.floor((x - lo) / (hi - lo) * n_grid).astype(np.int64)
    np.clip(idx, 0, n_grid - 1, out=idx)
    counts = np.bincount(idx, minlength=n_grid).astype(float)
    counts /= x.size
    counts.setflags(write=False)
    return BinnedData(lo=lo, hi=hi, n_grid=n_grid, counts=counts, n_samples=int(x.size))


def dct2(x):
    """Type-II DCT, ``y_k = 2 sum_j x_j cos(pi k (2j+1) / 2N)``."""
    x = np.asarray(x, dtype=float)
    check_power_of_two(x.shape[-1], "DCT length")
    return _fft.dct(x, type=2, norm=None)


def dct3(y):
    """Inverse of :func:`dct2` (a scaled type-III DCT)."""
    y = np.asarray(y, dtype=float)
    check_power_of_two(y.shape[-1], "DCT length")
    return _fft.idct(y, type=2, norm=None)
