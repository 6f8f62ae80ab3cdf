"""Synthetic data for the KDE benchmark, the two-group study and the ensemble."""
import hashlib
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats
from sklearn.model_selection import train_test_split

from ._validation import as_finite_1d
from .classifier import LinearBaselineClassifier, WassersteinFrechetClassifier
from .ensemble import PredictionMatrix
from .exceptions import InvalidInput
from .kde import estimate_subject
from .parallel import parallel_map
from .quantiles import QUANTILE_LEVELS, quantile_from_cdf

logger = logging.getLogger(__name__)

NU1_GRID = (0.1, 0.3, 0.5, 0.7)
SIGMA1_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


@dataclass(frozen=True)
class MixtureDensity:
    weights: tuple = (0.3, 0.6, 0.1)
    means: tuple = (6.0, 9.5, 12.0)
    sds: tuple = (1.0, 0.7, 0.5)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        comps = stats.norm.pdf(x[..., None], np.asarray(self.means), np.asarray(self.sds))
        return comps @ np.asarray(self.weights)

    def sample(self, n, rng):
        comp = rng.choice(len(self.weights), size=int(n), p=np.asarray(self.weights))
        return rng.normal(np.asarray(self.means)[comp], np.asarray(self.sds)[comp])


BENCHMARK_MIXTURE = MixtureDensity()


def sample_mixture(n, seed=None, mixture=BENCHMARK_MIXTURE):
    if int(n) < 1:
        raise InvalidInput("n must be at least 1")
    return mixture.sample(n, np.random.default_rng(seed))


def mixture_pdf(x, mixture=BENCHMARK_MIXTURE):
    return mixture.pdf(x)


def total_variation(p_grid, q_grid, grid):
    """Half the trapezoidal L1 distance between two densities on one grid."""
    p = as_finite_1d(p_grid, "p_grid")
    q = as_finite_1d(q_grid, "q_grid")
    grid = as_finite_1d(grid, "grid", min_length=2)
    if not (p.shape == q.shape == grid.shape):
        raise InvalidInput("densities and grid must have the same length")
    return float(min(max(0.5 * np.trapezoid(np.abs(p - q), grid), 0.0), 1.0))


def gaussian_quantile(mu, sigma, levels=QUANTILE_LEVELS):
    """Normal quantiles on ``levels`` with the end levels pulled in by half a step.

    Keeps the 0 and 1 levels finite so trapezoidal distances stay usable.
    """
    levels = np.asarray(levels, dtype=float)
    half = 0.5 * float(np.min(np.diff(levels)))
    return mu + sigma * stats.norm.ppf(np.clip(levels, half, 1.0 - half))


def kde_benchmark(n_list=(50, 100, 200, 400), reps=30, seed=0, mixture=BENCHMARK_MIXTURE,
                  eval_grid=None):
    """TV distance between the mixture and its estimate for each (n, rep).

    The estimate is read off on a fixed evaluation grid (zero outside its
    own support), so mass the estimate misses counts against it.
    """
    if eval_grid is None:
        eval_grid = np.linspace(0.0, 18.0, 8193)
    truth = mixture.pdf(eval_grid)
    rows = []
    for n in n_list:
        if int(n) < 2:
            raise InvalidInput("benchmark sample sizes must be at least 2")
        for rep in range(int(reps)):
            rng = np.random.default_rng([int(seed), int(n), rep])
            est = estimate_subject(mixture.sample(n, rng))
            g = np.interp(eval_grid, est.grid, est.density, left=0.0, right=0.0)
            rows.append({"n": int(n), "rep": rep, "tv": total_variation(truth, g, eval_grid)})
    return rows


@dataclass(frozen=True)
class SampleSet:
    subject_id: str
    values: np.ndarray
    covariates: np.ndarray
    label: object = None


@dataclass(frozen=True)
class GroupConfig:
    """Random-coefficient model for one group.

    Subject means are ``b0 + b1 * age + b2 * gender`` with
    ``b0 ~ N(0, beta0_sd^2)``, ``b1 ~ N(nu1, sigma1^2)``,
    ``b2 ~ N(nu2, sigma2^2)``; observations have variance
    ``beta0_sd^2 + sigma1^2 age^2 + sigma2^2 gender^2``.
    """

    nu1: float = 0.1
    nu2: float = 2.0
    sigma1: float = 0.1
    sigma2: float = 0.5
    n_subjects: int = 400
    n_obs_per_subject: int = 500
    age_range: tuple = (18.0, 90.0)
    beta0_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0 or self.beta0_sd < 0:
            raise InvalidInput("standard deviations must be non-negative")
        if self.n_obs_per_subject < 1 or self.n_subjects < 1:
            raise InvalidInput("n_subjects and n_obs_per_subject must be positive")


CONTROL_CONFIG = GroupConfig()
CASE_NU2 = 1.0
CASE_SIGMA2 = 0.5


def draw_group(config, rng=None):
    """Arrays ``(ages, genders, observations, means, variances)`` for a group."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n = config.n_subjects
    age = rng.uniform(config.age_range[0], config.age_range[1], size=n)
    gender = rng.integers(0, 2, size=n).astype(float)
    b0 = rng.normal(0.0, config.beta0_sd, size=n)
    b1 = rng.normal(config.nu1, config.sigma1, size=n)
    b2 = rng.normal(config.nu2, config.sigma2, size=n)
    mu = b0 + b1 * age + b2 * gender
    var = config.beta0_sd**2 + config.sigma1**2 * age**2 + config.sigma2**2 * gender**2
    obs = mu[:, None] + np.sqrt(var)[:, None] * rng.standard_normal((n, config.n_obs_per_subject))
    return age, gender, obs, mu, var


def generate_group(config, label=None, prefix="s", rng=None):
    age, gender, obs, _, _ = draw_group(config, rng)
    return [
        SampleSet(f"{prefix}{i:05d}", obs[i], np.array([age[i], gender[i]]), label)
        for i in range(config.n_subjects)
    ]


def cell_seed(master_seed, nu1, sigma1):
    """Stable per-cell seed derived from the master seed and the cell's parameters."""
    key = f"{int(master_seed)}:{float(nu1)!r}:{float(sigma1)!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def subject_quantiles(samples, n_grid=4096, pad_fraction=0.1):
    """Quantile matrix (one row per sample) and the bandwidth-convergence flags."""

    def one(x):
        est = estimate_subject(x, n_grid, pad_fraction)
        return quantile_from_cdf(est.grid, est.cdf).values, est.bandwidth.converged

    out = parallel_map(one, list(samples))
    if not out:
        return np.empty((0, QUANTILE_LEVELS.size)), np.empty(0, dtype=bool)
    Q = np.vstack([q for q, _ in out])
    return Q, np.array([c for _, c in out])


@dataclass
class ExperimentConfig:
    control: GroupConfig = field(default_factory=GroupConfig)
    case_nu2: float = CASE_NU2
    case_sigma2: float = CASE_SIGMA2
    nu1_grid: tuple = NU1_GRID
    sigma1_grid: tuple = SIGMA1_GRID
    n_subjects: int = 400
    n_obs_per_subject: int = 500
    train_fraction: float = 0.7
    folds: int = 5
    seed: int = 0

    @classmethod
    def full_scale(cls, **kwargs):
        return cls(n_subjects=2000, n_obs_per_subject=1000, **kwargs)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        control = data.pop("control", None)
        full = data.pop("full_scale", False)
        if full:
            data.setdefault("n_subjects", 2000)
            data.setdefault("n_obs_per_subject", 1000)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown experiment config keys: {sorted(unknown)}")
        for key in ("nu1_grid", "sigma1_grid"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        cfg = cls(**data)
        if control is not None:
            cfg.control = GroupConfig(**{**asdict(GroupConfig()), **control})
        return cfg

    def to_dict(self):
        return asdict(self)


def _features(age, gender, Q):
    return np.column_stack([age, gender, Q])


def run_experiment(config=None):
    """Wasserstein-Fréchet vs linear-baseline accuracy over the (nu1, sigma1) grid.

    The control group depends only on the master seed and is generated once;
    every cell draws its own case group and its own stratified train/test
    split from a seed derived from ``(seed, nu1, sigma1)``.

    Returns
    -------
    list of dict
        Keys ``nu1, sigma1, acc_wf, acc_linear, k_selected, seed``.
    """
    config = ExperimentConfig() if config is None else config
    ctl_cfg = replace(config.control, n_subjects=config.n_subjects,
                      n_obs_per_subject=config.n_obs_per_subject, seed=int(config.seed))
    c_age, c_gender, c_obs, _, _ = draw_group(ctl_cfg)
    c_Q, _ = subject_quantiles(c_obs)
    c_mean = c_obs.mean(axis=1)

    rows = []
    for nu1 in config.nu1_grid:
        for sigma1 in config.sigma1_grid:
            seed = cell_seed(config.seed, nu1, sigma1)
            case_cfg = replace(ctl_cfg, nu1=float(nu1), sigma1=float(sigma1), nu2=config.case_nu2,
                               sigma2=config.case_sigma2, seed=seed)
            m_age, m_gender, m_obs, _, _ = draw_group(case_cfg)
            m_Q, _ = subject_quantiles(m_obs)
            rows.append(_evaluate_cell(
                np.concatenate([c_age, m_age]),
                np.concatenate([c_gender, m_gender]),
                np.vstack([c_Q, m_Q]),
                np.concatenate([c_mean, m_obs.mean(axis=1)]),
                np.r_[np.zeros(c_age.size, int), np.ones(m_age.size, int)],
                config, seed, nu1, sigma1,
            ))
            logger.info("nu1=%s sigma1=%s acc_wf=%.3f acc_linear=%.3f", nu1, sigma1,
                        rows[-1]["acc_wf"], rows[-1]["acc_linear"])
    return rows


def _evaluate_cell(age, gender, Q, ybar, y, config, seed, nu1, sigma1):
    idx = np.arange(y.size)
    train, test = train_test_split(idx, train_size=config.train_fraction, stratify=y, random_state=seed % 2**32)
    X = _features(age, gender, Q)
    wf = WassersteinFrechetClassifier(n_covariates=2, folds=config.folds, random_state=seed % 2**32)
    wf.fit(X[train], y[train])
    acc_wf = float(np.mean(wf.predict(X[test]) == y[test]))
    L = np.column_stack([age, gender, ybar])
    lin = LinearBaselineClassifier().fit(L[train], y[train])
    acc_lin = float(np.mean(lin.predict(L[test]) == y[test]))
    return {"nu1": float(nu1), "sigma1": float(sigma1), "acc_wf": acc_wf, "acc_linear": acc_lin,
            "k_selected": float(wf.k_), "seed": int(seed)}



def simulate_channel_decisions(n_subjects=400, n_regions=68, n_bands=3, p_band_informative=0.7,
                               channel_accuracy=0.7, seed=0):
    """Binary region-by-band decisions in which each band carries partial signal.

    For every subject and band, the band is informative with probability
    ``p_band_informative``; the subject's channels in an informative band
    match the true label with probability ``channel_accuracy`` and are coin
    flips otherwise.  Labels are balanced.

    Returns
    -------
    (PredictionMatrix, ndarray)
    """
    rng = np.random.default_rng(seed)
    y = np.zeros(n_subjects, dtype=int)
    y[rng.permutation(n_subjects)[: n_subjects // 2]] = 1
    informative = rng.random((n_subjects, n_bands)) < p_band_informative
    p_correct = np.where(informative, channel_accuracy, 0.5)
    p_correct = np.repeat(p_correct, n_regions, axis=1)  # band-major column order
    correct = rng.random((n_subjects, n_bands * n_regions)) < p_correct
    values = np.where(correct, y[:, None], 1 - y[:, None])
    names = tuple(f"b{b}_r{r:02d}" for b in range(n_bands) for r in range(n_regions))
    ids = tuple(f"s{i:05d}" for i in range(n_subjects))
    return PredictionMatrix(values, names, ids), y
