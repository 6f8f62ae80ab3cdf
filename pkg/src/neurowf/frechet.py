"""Wasserstein geometry on quantile functions and global Fréchet regression."""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_finite_1d, as_finite_2d
from .exceptions import InvalidInput, SingularCovariance
from .quantiles import QUANTILE_LEVELS, QuantileFunction, monotone_refit

DEFAULT_RIDGE_SCALE = 1e-8


def _values(q):
    return q.values if isinstance(q, QuantileFunction) else np.asarray(q, dtype=float)


def _levels_of(q, fallback):
    return q.levels if isinstance(q, QuantileFunction) else fallback


def wasserstein_distance(qa, qb, levels=None):
    """2-Wasserstein distance between two quantile functions.

    Trapezoidal quadrature of ``(Q_a - Q_b)^2`` over the shared levels.
    Accepts :class:`QuantileFunction` objects or plain arrays on ``levels``
    (the 1025-point default grid when omitted).
    """
    default = QUANTILE_LEVELS if levels is None else np.asarray(levels, dtype=float)
    la, lb = _levels_of(qa, default), _levels_of(qb, default)
    if la.shape != lb.shape or not np.array_equal(la, lb):
        raise InvalidInput("quantile functions are on different level grids")
    a, b = _values(qa), _values(qb)
    if a.shape != la.shape or b.shape != la.shape:
        raise InvalidInput("quantile values do not match the level grid")
    return float(np.sqrt(max(np.trapezoid((a - b) ** 2, la), 0.0)))


def wasserstein_distances(Q, ref, levels=QUANTILE_LEVELS):
    """Row-wise distances between ``Q`` and ``ref`` (same shape or one row)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    levels = np.asarray(levels, dtype=float)
    if Q.shape[1] != levels.size or ref.shape[1] != levels.size:
        raise InvalidInput("quantile matrix does not match the level grid")
    return np.sqrt(np.maximum(np.trapezoid((Q - ref) ** 2, levels, axis=1), 0.0))


def frechet_mean(quantile_matrix, levels=QUANTILE_LEVELS):
    """Wasserstein barycentre: pointwise row average, then monotone refit."""
    Q = as_finite_2d(quantile_matrix, "quantile_matrix")
    if Q.shape[0] < 1:
        raise InvalidInput("need at least one quantile function")
    return QuantileFunction(np.asarray(levels, float), monotone_refit(Q.mean(axis=0)))


def frechet_variance(quantile_matrix, levels=QUANTILE_LEVELS):
    Q = as_finite_2d(quantile_matrix, "quantile_matrix")
    mean = frechet_mean(Q, levels).values
    return float(np.mean(wasserstein_distances(Q, mean, levels) ** 2))


@dataclass(frozen=True)
class FrechetModel:
    """Training quantiles of one group plus the covariate moments.

    ``sigma_hat`` is the biased (1/n) sample covariance; the ridge is added
    only when the weights are computed.
    """

    quantile_matrix: np.ndarray
    covariates: np.ndarray
    z_bar: np.ndarray
    sigma_hat: np.ndarray
    ridge: float
    group_tag: str = ""
    levels: np.ndarray = QUANTILE_LEVELS

    @property
    def n_subjects(self):
        return self.quantile_matrix.shape[0]

    @property
    def n_covariates(self):
        return self.covariates.shape[1]

    def _factor(self):
        cached = self.__dict__.get("_chol")
        if cached is None:
            p = self.n_covariates
            mat = self.sigma_hat + self.ridge * np.eye(p)
            try:
                cached = linalg.cho_factor(mat, lower=True)
            except linalg.LinAlgError as exc:
                raise SingularCovariance(
                    f"covariate covariance of group {self.group_tag!r} is singular"
                ) from exc
            object.__setattr__(self, "_chol", cached)
        return cached


def fit_frechet_model(quantile_matrix, covariates, group_tag="", ridge=None, levels=QUANTILE_LEVELS):
    """Collect the statistics needed to evaluate prototypes at any covariate.

    Parameters
    ----------
    quantile_matrix : array_like of shape (n, m)
        One nondecreasing quantile function per row.
    covariates : array_like of shape (n, p)
    ridge : float, optional
        Diagonal regulariser.  Defaults to ``1e-8 * trace(sigma_hat) / p``.
    """
    Q = as_finite_2d(quantile_matrix, "quantile_matrix")
    Z = as_finite_2d(covariates, "covariates")
    levels = np.asarray(levels, dtype=float)
    if Q.shape[0] != Z.shape[0]:
        raise InvalidInput("quantile_matrix and covariates must have the same number of rows")
    if Q.shape[0] < 1:
        raise InvalidInput("need at least one subject")
    if Q.shape[1] != levels.size:
        raise InvalidInput("quantile_matrix columns do not match the level grid")
    if np.any(np.diff(Q, axis=1) < 0):
        raise InvalidInput("every training quantile function must be nondecreasing")
    z_bar = Z.mean(axis=0)
    centred = Z - z_bar
    sigma_hat = centred.T @ centred / Z.shape[0]
    if ridge is None:
        ridge = DEFAULT_RIDGE_SCALE * np.trace(sigma_hat) / Z.shape[1]
    ridge = float(ridge)
    if ridge < 0:
        raise InvalidInput("ridge must be non-negative")
    model = FrechetModel(
        quantile_matrix=Q,
        covariates=Z,
        z_bar=z_bar,
        sigma_hat=sigma_hat,
        ridge=ridge,
        group_tag=str(group_tag),
        levels=levels,
    )
    if model.n_subjects > 1:
        model._factor()
    return model


def _weight_matrix(model, z):
    """``s_in(z)`` for each row of ``z``; shape (n_eval, n_train)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != model.n_covariates:
        raise InvalidInput(f"covariate vector must have {model.n_covariates} entries, got {z.shape[1]}")
    if not np.all(np.isfinite(z)):
        raise InvalidInput("covariates must be finite")
    if model.n_subjects == 1:
        return np.ones((z.shape[0], 1))
    solved = linalg.cho_solve(model._factor(), (z - model.z_bar).T)
    return 1.0 + ((model.covariates - model.z_bar) @ solved).T


def empirical_weights(model, z):
    """Regression weights ``1 + (Z_i - Z_bar)^T Sigma^-1 (z - Z_bar)``."""
    return _weight_matrix(model, as_finite_1d(z, "z"))[0]


def prototype_matrix(model, Z):
    """Prototype quantile values at each row of ``Z``; shape (n_eval, m)."""
    S = _weight_matrix(model, Z)
    raw = S @ model.quantile_matrix / model.n_subjects
    out = np.empty_like(raw)
    for i, row in enumerate(raw):
        out[i] = monotone_refit(row)
    return out


def prototype_quantile(model, z):
    """Covariate-matched prototype: weighted row mean projected to be monotone."""
    z = as_finite_1d(z, "z")
    return QuantileFunction(model.levels, prototype_matrix(model, z[None, :])[0])


def residual_variance(model):
    """Mean squared distance of the training rows to their own prototypes."""
    fitted = prototype_matrix(model, model.covariates)
    return float(np.mean(wasserstein_distances(model.quantile_matrix, fitted, model.levels) ** 2))


class WassersteinFrechetRegressor(RegressorMixin, BaseEstimator):
    """Global Fréchet regression of quantile functions on Euclidean covariates.

    ``fit(Z, Q)`` takes covariates ``Z`` (n, p) and training quantile
    functions ``Q`` (n, m); ``predict(Z)`` returns prototype quantile
    functions, one row per query.

    Parameters
    ----------
    ridge : float or None, default=None
        Covariance regulariser; ``None`` uses a trace-scaled 1e-8.
    """

    def __init__(self, ridge=None):
        self.ridge = ridge

    def fit(self, Z, Q):
        self.model_ = fit_frechet_model(Q, Z, ridge=self.ridge)
        self.n_features_in_ = self.model_.n_covariates
        return self

    def predict(self, Z):
        check_is_fitted(self, "model_")
        return prototype_matrix(self.model_, as_finite_2d(Z, "Z"))

    def score(self, Z, Q, sample_weight=None):
        """Negative mean squared Wasserstein distance to the prototypes."""
        pred = self.predict(Z)
        d2 = wasserstein_distances(np.asarray(Q, float), pred, self.model_.levels) ** 2
        return -float(np.average(d2, weights=sample_weight))
