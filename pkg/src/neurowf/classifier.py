"""Covariate-matched two-prototype classification and the linear baseline."""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import StratifiedKFold
from sklearn.utils.validation import check_is_fitted

from ._validation import as_finite_1d, as_finite_2d, check_binary_labels, check_positive
from .exceptions import InsufficientData, InvalidInput, RankDeficient
from .frechet import (
    FrechetModel,
    fit_frechet_model,
    prototype_matrix,
    prototype_quantile,
    wasserstein_distance,
    wasserstein_distances,
)
from .quantiles import QUANTILE_LEVELS, QuantileFunction

CONTROL, MTBI = 0, 1
LABEL_NAMES = ("control", "mTBI")
DEFAULT_K_GRID = np.round(np.arange(0.50, 2.0001, 0.05), 2)
DEFAULT_FOLDS = 5


@dataclass(frozen=True)
class Decision:
    label: str
    d1: float
    d2: float
    k: float


@dataclass(frozen=True)
class Metrics:
    acc: float
    f1: float
    tp: int
    tn: int
    fp: int
    fn: int


def decide(d1, d2, k):
    """Vectorised rule: 0 (control) where ``d1 <= k * d2``, else 1."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    return np.where(d1 <= k * d2, CONTROL, MTBI)


def classify(ctl, mtbi, q0, z0, k=1.0):
    """Compare a subject's quantile function to both group prototypes at ``z0``."""
    k = check_positive(k, "k")
    if not np.array_equal(ctl.levels, mtbi.levels):
        raise InvalidInput("group models use different quantile grids")
    if isinstance(q0, QuantileFunction):
        if not np.array_equal(q0.levels, ctl.levels):
            raise InvalidInput("subject quantile grid does not match the models")
    else:
        q0 = QuantileFunction(ctl.levels, as_finite_1d(q0, "q0"))
    d1 = wasserstein_distance(q0, prototype_quantile(ctl, z0))
    d2 = wasserstein_distance(q0, prototype_quantile(mtbi, z0))
    return Decision(label=LABEL_NAMES[int(decide(d1, d2, k))], d1=d1, d2=d2, k=k)


def prototype_distances(ctl, mtbi, Q, Z):
    """Distances of each row of ``Q`` to the control and mTBI prototypes."""
    Q = as_finite_2d(Q, "Q")
    Z = as_finite_2d(Z, "Z")
    if Q.shape[0] != Z.shape[0]:
        raise InvalidInput("Q and Z must have the same number of rows")
    if Q.shape[1] != ctl.levels.size or not np.array_equal(ctl.levels, mtbi.levels):
        raise InvalidInput("quantile grid mismatch between subjects and models")
    d1 = wasserstein_distances(Q, prototype_matrix(ctl, Z), ctl.levels)
    d2 = wasserstein_distances(Q, prototype_matrix(mtbi, Z), mtbi.levels)
    return d1, d2


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def compute_metrics(predicted, actual):
    """Confusion counts, accuracy and balanced (macro) F1; mTBI is positive."""
    pred = check_binary_labels(predicted, "predicted")
    true = check_binary_labels(actual, "actual")
    if pred.shape != true.shape:
        raise InvalidInput("predicted and actual must have equal length")
    if pred.size == 0:
        raise InvalidInput("no predictions to score")
    tp = int(np.sum((pred == 1) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    acc = (tp + tn) / pred.size
    f1 = 0.5 * (_f1(tp, fp, fn) + _f1(tn, fn, fp))
    return Metrics(acc=float(acc), f1=float(f1), tp=tp, tn=tn, fp=fp, fn=fn)


def _balanced_f1(pred, true):
    tp = np.sum((pred == 1) & (true == 1))
    tn = np.sum((pred == 0) & (true == 0))
    fp = np.sum((pred == 1) & (true == 0))
    fn = np.sum((pred == 0) & (true == 1))
    return 0.5 * (_f1(tp, fp, fn) + _f1(tn, fn, fp))


def _n_splits(y, folds):
    folds = int(folds)
    if folds < 2:
        raise InvalidInput("folds must be at least 2")
    counts = np.bincount(y, minlength=2)
    if np.any(counts == 0):
        raise InsufficientData("threshold selection needs subjects from both classes")
    return max(2, min(folds, int(counts.min())))


def threshold_scores(d1, d2, y, folds=DEFAULT_FOLDS, k_grid=DEFAULT_K_GRID, random_state=0):
    """Mean balanced F1 across stratified folds for each candidate k."""
    d1 = as_finite_1d(d1, "d1")
    d2 = as_finite_1d(d2, "d2")
    y = check_binary_labels(y)
    k_grid = as_finite_1d(k_grid, "k_grid")
    if np.any(k_grid <= 0):
        raise InvalidInput("k_grid values must be positive")
    n_splits = _n_splits(y, folds)
    if y.size < 2 * n_splits or np.bincount(y, minlength=2).min() < 2:
        raise InsufficientData("too few subjects for cross-validated threshold selection")
    cv = StratifiedKFold(n_splits=n_splits, shuffle=True, random_state=random_state)
    scores = np.zeros(k_grid.size)
    for _, held in cv.split(np.zeros(y.size), y):
        for i, k in enumerate(k_grid):
            scores[i] += _balanced_f1(decide(d1[held], d2[held], k), y[held])
    return scores / n_splits


def pick_threshold(k_grid, scores):
    """Best-scoring k; ties go to the k closest to 1, then the smaller k."""
    k_grid = np.asarray(k_grid, dtype=float)
    scores = np.asarray(scores, dtype=float)
    best = scores.max()
    candidates = np.flatnonzero(np.isclose(scores, best, rtol=0.0, atol=1e-12))
    order = sorted(candidates, key=lambda i: (abs(k_grid[i] - 1.0), k_grid[i]))
    return float(k_grid[order[0]])


def select_threshold(ctl, mtbi, labeled_subjects, folds=DEFAULT_FOLDS, k_grid=DEFAULT_K_GRID, random_state=0):
    """Cross-validate the decision threshold with the prototypes held fixed.

    Parameters
    ----------
    labeled_subjects : tuple of (Q, Z, y)
        Quantile matrix, covariates, binary labels (0 control, 1 mTBI).
    """
    Q, Z, y = labeled_subjects
    y = check_binary_labels(y)
    if np.unique(y).size < 2:
        raise InsufficientData("threshold selection needs subjects from both classes")
    d1, d2 = prototype_distances(ctl, mtbi, Q, Z)
    scores = threshold_scores(d1, d2, y, folds, k_grid, random_state)
    return pick_threshold(k_grid, scores)


@dataclass(frozen=True)
class LinearBaselineModel:
    """OLS coefficients (intercept first) for the control and mTBI groups."""

    control: np.ndarray
    mtbi: np.ndarray


def _ols(X, y):
    design = np.column_stack([np.ones(X.shape[0]), X])
    if design.shape[0] < design.shape[1]:
        raise RankDeficient(f"need at least {design.shape[1]} subjects per group, got {design.shape[0]}")
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficient("linear baseline design matrix is rank deficient")
    return coef


def fit_linear_baseline(subject_means, covariates, labels):
    """Per-group OLS of subject-level means on ``(1, covariates)``."""
    ybar = as_finite_1d(subject_means, "subject_means")
    Z = as_finite_2d(covariates, "covariates")
    y = check_binary_labels(labels, "labels")
    if not (ybar.size == Z.shape[0] == y.size):
        raise InvalidInput("subject_means, covariates and labels must align")
    return LinearBaselineModel(control=_ols(Z[y == 0], ybar[y == 0]), mtbi=_ols(Z[y == 1], ybar[y == 1]))


def linear_predictions(model, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    design = np.column_stack([np.ones(Z.shape[0]), Z])
    return design @ model.control, design @ model.mtbi


def classify_linear(model, z0, ybar0):
    """Label ``"control"`` when the control prediction is at least as close."""
    p1, p2 = linear_predictions(model, as_finite_1d(z0, "z0")[None, :])
    return LABEL_NAMES[CONTROL] if abs(p1[0] - ybar0) <= abs(p2[0] - ybar0) else LABEL_NAMES[MTBI]


def split_features(X, n_covariates):
    X = as_finite_2d(X, "X")
    if X.shape[1] <= n_covariates:
        raise InvalidInput(f"X needs more than {n_covariates} columns")
    return X[:, :n_covariates], X[:, n_covariates:]


class WassersteinFrechetClassifier(ClassifierMixin, BaseEstimator):
    """Two-group Fréchet regression classifier.

    Each row of ``X`` is ``[covariates..., quantile values...]``; the first
    ``n_covariates`` columns are covariates and the remaining columns are a
    quantile function on the default level grid (or ``levels``).  Labels
    are 0 for control and 1 for mTBI.

    Parameters
    ----------
    n_covariates : int, default=2
    k : float or None, default=None
        Fixed threshold; ``None`` selects it by stratified cross-validation.
    k_grid : array_like, optional
        Candidate thresholds, 0.50 to 2.00 in steps of 0.05 by default.
    folds : int, default=5
    ridge : float or None, default=None
    random_state : int, default=0
        Seed of the fold shuffle.
    """

    def __init__(self, n_covariates=2, k=None, k_grid=None, folds=DEFAULT_FOLDS, ridge=None,
                 random_state=0, levels=None):
        self.n_covariates = n_covariates
        self.k = k
        self.k_grid = k_grid
        self.folds = folds
        self.ridge = ridge
        self.random_state = random_state
        self.levels = levels

    def fit(self, X, y):
        Z, Q = split_features(X, self.n_covariates)
        y = check_binary_labels(y)
        if np.unique(y).size < 2:
            raise InsufficientData("training data must contain both classes")
        levels = QUANTILE_LEVELS if self.levels is None else np.asarray(self.levels, float)
        self.control_model_ = fit_frechet_model(Q[y == 0], Z[y == 0], "control", self.ridge, levels)
        self.mtbi_model_ = fit_frechet_model(Q[y == 1], Z[y == 1], "mTBI", self.ridge, levels)
        if self.k is None:
            grid = DEFAULT_K_GRID if self.k_grid is None else np.asarray(self.k_grid, float)
            d1, d2 = prototype_distances(self.control_model_, self.mtbi_model_, Q, Z)
            self.cv_scores_ = threshold_scores(d1, d2, y, self.folds, grid, self.random_state)
            self.k_ = pick_threshold(grid, self.cv_scores_)
        else:
            self.k_ = check_positive(self.k, "k")
        self.classes_ = np.array([CONTROL, MTBI])
        self.n_features_in_ = Z.shape[1] + Q.shape[1]
        return self

    @classmethod
    def from_models(cls, control_model, mtbi_model, k):
        """Rebuild a fitted classifier from stored group models."""
        clf = cls(n_covariates=control_model.n_covariates, k=k, levels=control_model.levels)
        clf.control_model_ = control_model
        clf.mtbi_model_ = mtbi_model
        clf.k_ = float(k)
        clf.classes_ = np.array([CONTROL, MTBI])
        clf.n_features_in_ = control_model.n_covariates + control_model.levels.size
        return clf

    def distances(self, X):
        check_is_fitted(self, "k_")
        Z, Q = split_features(X, self.n_covariates)
        return prototype_distances(self.control_model_, self.mtbi_model_, Q, Z)

    def decision_function(self, X):
        """``d1 - k * d2``; positive values mean mTBI."""
        d1, d2 = self.distances(X)
        return d1 - self.k_ * d2

    def predict(self, X):
        d1, d2 = self.distances(X)
        return decide(d1, d2, self.k_)


class LinearBaselineClassifier(ClassifierMixin, BaseEstimator):
    """Nearest group-wise OLS prediction of the subject mean.

    Rows of ``X`` are ``[covariates..., subject_mean]``.
    """

    def fit(self, X, y):
        X = as_finite_2d(X, "X")
        self.model_ = fit_linear_baseline(X[:, -1], X[:, :-1], y)
        self.classes_ = np.array([CONTROL, MTBI])
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = as_finite_2d(X, "X")
        p1, p2 = linear_predictions(self.model_, X[:, :-1])
        ybar = X[:, -1]
        return np.where(np.abs(p1 - ybar) <= np.abs(p2 - ybar), CONTROL, MTBI)
