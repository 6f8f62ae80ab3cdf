"""Wasserstein-Fréchet regression on quantile functions estimated by diffusion KDE."""
__version__ = "0.1.0"

from .classifier import (
    Decision,
    LinearBaselineClassifier,
    LinearBaselineModel,
    Metrics,
    WassersteinFrechetClassifier,
    classify,
    classify_linear,
    compute_metrics,
    fit_linear_baseline,
    select_threshold,
)
from .ensemble import BinaryRandomForest, ForestModel, PredictionMatrix, fit_forest, predict_forest
from .exceptions import InsufficientData, InvalidInput, RankDeficient, SingularCovariance
from .frechet import (
    FrechetModel,
    WassersteinFrechetRegressor,
    empirical_weights,
    fit_frechet_model,
    frechet_mean,
    frechet_variance,
    prototype_quantile,
    residual_variance,
    wasserstein_distance,
)
from .grid import BinnedData, bin_samples, dct2, dct3
from .kde import (
    BandwidthResult,
    DensityEstimate,
    DiffusionKDE,
    estimate_cdf,
    estimate_density,
    l2_norm_derivative_spectral,
    select_bandwidth,
)
from .quantiles import QUANTILE_LEVELS, QuantileFunction, QuantileTransformer, invert_cdf, monotone_refit

__all__ = [
    "BandwidthResult",
    "BinaryRandomForest",
    "BinnedData",
    "Decision",
    "DensityEstimate",
    "DiffusionKDE",
    "ForestModel",
    "FrechetModel",
    "InsufficientData",
    "InvalidInput",
    "LinearBaselineClassifier",
    "LinearBaselineModel",
    "Metrics",
    "PredictionMatrix",
    "QUANTILE_LEVELS",
    "QuantileFunction",
    "QuantileTransformer",
    "RankDeficient",
    "SingularCovariance",
    "WassersteinFrechetClassifier",
    "WassersteinFrechetRegressor",
    "bin_samples",
    "classify",
    "classify_linear",
    "compute_metrics",
    "dct2",
    "dct3",
    "empirical_weights",
    "estimate_cdf",
    "estimate_density",
    "fit_forest",
    "fit_frechet_model",
    "fit_linear_baseline",
    "frechet_mean",
    "frechet_variance",
    "invert_cdf",
    "l2_norm_derivative_spectral",
    "monotone_refit",
    "predict_forest",
    "prototype_quantile",
    "residual_variance",
    "select_bandwidth",
    "select_threshold",
    "wasserstein_distance",
]
