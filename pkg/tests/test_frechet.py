import math

import numpy as np
import pytest
from scipy import stats

from neurowf import (
    QUANTILE_LEVELS,
    InvalidInput,
    QuantileFunction,
    SingularCovariance,
    WassersteinFrechetRegressor,
    empirical_weights,
    fit_frechet_model,
    frechet_mean,
    frechet_variance,
    prototype_quantile,
    residual_variance,
    wasserstein_distance,
)
from neurowf.simulation import gaussian_quantile
from oracles import quad_w2_gaussians

T = QUANTILE_LEVELS


def qf(mu, sigma):
    return QuantileFunction(T, gaussian_quantile(mu, sigma))


def random_model(rng, n=None, p=2, noise=1.0):
    n = int(rng.integers(p + 2, 40)) if n is None else n
    Z = rng.normal(size=(n, p))
    base = stats.norm.ppf(np.clip(T, 1e-4, 1 - 1e-4))
    Q = rng.normal(size=(n, 1)) * noise + rng.uniform(0.5, 2.0, size=(n, 1)) * base
    return fit_frechet_model(Q, Z)


def test_distance_to_self_is_zero():
    q = qf(0.3, 1.2)
    assert wasserstein_distance(q, q) == 0.0


def test_location_shift():
    assert wasserstein_distance(qf(0, 1), qf(1, 1)) == pytest.approx(1.0, abs=2e-3)


def test_gaussian_closed_form():
    expected = math.sqrt(4 + 1)
    assert quad_w2_gaussians(0, 1, 2, 2) == pytest.approx(expected, abs=1e-6)
    assert wasserstein_distance(qf(0, 1), qf(2, 2)) == pytest.approx(expected, abs=5e-3)


def test_distance_rejects_grid_mismatch():
    a = QuantileFunction(np.linspace(0, 1, 5), np.arange(5.0))
    b = QuantileFunction(np.linspace(0, 1, 6), np.arange(6.0))
    with pytest.raises(InvalidInput):
        wasserstein_distance(a, b)


def test_distance_is_a_metric(rng):
    for _ in range(200):
        a, b, c = (np.sort(rng.normal(size=T.size)) * rng.uniform(0.1, 5) for _ in range(3))
        dab, dba = wasserstein_distance(a, b), wasserstein_distance(b, a)
        assert dab == dba
        assert wasserstein_distance(a, c) <= dab + wasserstein_distance(b, c) + 1e-10


def test_weights_at_mean_are_one(rng):
    m = random_model(rng)
    np.testing.assert_allclose(empirical_weights(m, m.z_bar), 1.0, atol=1e-12)


def test_weights_sum_to_n(rng):
    for _ in range(200):
        m = random_model(rng, p=int(rng.integers(1, 4)))
        z = rng.normal(size=m.n_covariates) * 5
        assert empirical_weights(m, z).sum() == pytest.approx(m.n_subjects, abs=1e-8)


def test_weights_hand_example():
    Q = np.tile(T, (2, 1))
    m = fit_frechet_model(Q, [[0.0], [1.0]], ridge=0.0)
    assert m.sigma_hat[0, 0] == pytest.approx(0.25)
    np.testing.assert_allclose(empirical_weights(m, [1.0]), [0.0, 2.0], atol=1e-12)


def test_singular_covariance_without_ridge():
    Q = np.tile(T, (3, 1))
    with pytest.raises(SingularCovariance):
        fit_frechet_model(Q, [[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]], ridge=0.0)


def test_default_ridge_handles_binary_collinearity(rng):
    # every subject has gender 1: covariance is singular without the ridge
    Z = np.column_stack([rng.uniform(18, 90, 10), np.ones(10)])
    m = fit_frechet_model(np.tile(T, (10, 1)), Z)
    assert m.ridge > 0
    assert np.all(np.isfinite(empirical_weights(m, [40.0, 1.0])))


def test_prototype_at_mean_is_frechet_mean(rng):
    for _ in range(50):
        m = random_model(rng)
        np.testing.assert_allclose(prototype_quantile(m, m.z_bar).values,
                                   frechet_mean(m.quantile_matrix).values, atol=1e-10)


def test_single_subject_prototype(rng):
    q = np.sort(rng.normal(size=T.size))
    m = fit_frechet_model(q[None, :], [[30.0, 1.0]])
    np.testing.assert_array_equal(prototype_quantile(m, [70.0, 0.0]).values, q)


def test_linear_location_family_matches_least_squares(rng):
    n = 40
    Z = np.column_stack([rng.uniform(18, 90, n), rng.integers(0, 2, n)])
    a = 0.5 + 0.1 * Z[:, 0] - 1.5 * Z[:, 1]
    base = gaussian_quantile(0.0, 1.0)
    Q = a[:, None] + base[None, :]
    m = fit_frechet_model(Q, Z, ridge=0.0)
    z = np.array([55.0, 1.0])
    proto = prototype_quantile(m, z).values
    # oracle: pointwise OLS of Q(t) on (1, z), evaluated at z
    design = np.column_stack([np.ones(n), Z])
    coef, *_ = np.linalg.lstsq(design, Q, rcond=None)
    ols = np.r_[1.0, z] @ coef
    np.testing.assert_allclose(proto, ols, atol=1e-6)
    np.testing.assert_allclose(proto, 0.5 + 0.1 * 55 - 1.5 + base, atol=1e-6)


def test_prototype_is_monotone_even_when_extrapolating(rng):
    for _ in range(50):
        m = random_model(rng, noise=3.0)
        z = rng.normal(size=2) * 20
        assert np.all(np.diff(prototype_quantile(m, z).values) >= 0)


def test_translation_equivariance(rng):
    m = random_model(rng)
    c = 7.25
    shifted = fit_frechet_model(m.quantile_matrix + c, m.covariates)
    z = rng.normal(size=2)
    np.testing.assert_allclose(prototype_quantile(shifted, z).values,
                               prototype_quantile(m, z).values + c, atol=1e-10)


def test_frechet_mean_and_variance_identical_rows():
    q = gaussian_quantile(1.0, 2.0)
    Q = np.tile(q, (4, 1))
    np.testing.assert_allclose(frechet_mean(Q).values, q)
    assert frechet_variance(Q) == pytest.approx(0.0, abs=1e-24)


def test_frechet_mean_of_two_gaussians():
    Q = np.vstack([gaussian_quantile(-1, 1), gaussian_quantile(1, 1)])
    np.testing.assert_allclose(frechet_mean(Q).values, gaussian_quantile(0, 1), atol=2e-3)
    assert frechet_variance(Q) == pytest.approx(1.0, abs=1e-2)


def test_frechet_variance_permutation_invariant(rng):
    Q = np.sort(rng.normal(size=(6, T.size)), axis=1)
    assert frechet_variance(Q) == pytest.approx(frechet_variance(Q[::-1]), rel=1e-12)


def test_residual_variance_single_subject():
    m = fit_frechet_model(gaussian_quantile(0, 1)[None, :], [[1.0]])
    assert residual_variance(m) == 0.0


def test_residual_variance_noiseless_family(rng):
    Z = rng.uniform(0, 10, size=(25, 1))
    Q = 2.0 * Z + gaussian_quantile(0.0, 1.0)[None, :]
    assert residual_variance(fit_frechet_model(Q, Z, ridge=0.0)) == pytest.approx(0.0, abs=1e-10)


def test_residual_variance_bounded_by_frechet_variance(rng):
    for _ in range(100):
        m = random_model(rng)
        assert residual_variance(m) <= frechet_variance(m.quantile_matrix) + 1e-8


def test_regressor_estimator_api(rng):
    Z = rng.uniform(0, 1, size=(30, 2))
    Q = (3 * Z[:, :1] - Z[:, 1:]) + gaussian_quantile(0, 1)[None, :]
    reg = WassersteinFrechetRegressor(ridge=0.0).fit(Z, Q)
    assert reg.get_params() == {"ridge": 0.0}
    np.testing.assert_allclose(reg.predict(Z), Q, atol=1e-8)
    assert reg.score(Z, Q) == pytest.approx(0.0, abs=1e-12)


def test_fit_rejects_decreasing_rows():
    with pytest.raises(InvalidInput):
        fit_frechet_model(np.tile(T[::-1], (2, 1)), [[0.0], [1.0]])
