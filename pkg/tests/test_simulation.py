import numpy as np
import pytest
from scipy import stats

from neurowf import InvalidInput
from neurowf.simulation import (
    BENCHMARK_MIXTURE,
    CONTROL_CONFIG,
    ExperimentConfig,
    GroupConfig,
    cell_seed,
    draw_group,
    gaussian_quantile,
    generate_group,
    kde_benchmark,
    mixture_pdf,
    run_experiment,
    sample_mixture,
    subject_quantiles,
    total_variation,
)


def test_mixture_pdf():
    x = np.linspace(0, 18, 20001)
    assert np.trapezoid(mixture_pdf(x), x) == pytest.approx(1.0, abs=1e-6)
    assert mixture_pdf(9.5) > mixture_pdf(6.0) > mixture_pdf(12.0)


def test_mixture_sample_mean():
    assert sample_mixture(1_000_000, seed=0).mean() == pytest.approx(8.7, abs=0.01)
    np.testing.assert_array_equal(sample_mixture(10, seed=3), sample_mixture(10, seed=3))
    with pytest.raises(InvalidInput):
        sample_mixture(0)


def test_total_variation_examples():
    x = np.linspace(-10, 10, 20001)
    p = stats.norm.pdf(x)
    assert total_variation(p, p, x) == 0.0
    a = np.where(x < -1, 1 / 9.0, 0.0)
    b = np.where(x > 1, 1 / 9.0, 0.0)
    assert total_variation(a, b, x) == pytest.approx(1.0, abs=1e-3)
    q = stats.norm.pdf(x, 0.1)
    assert total_variation(p, q, x) == pytest.approx(2 * stats.norm.cdf(0.05) - 1, abs=1e-3)
    with pytest.raises(InvalidInput):
        total_variation(p, q[:-1], x)


def test_gaussian_quantile_finite_and_monotone():
    q = gaussian_quantile(1.0, 2.0)
    assert np.all(np.isfinite(q)) and np.all(np.diff(q) > 0)
    assert q[512] == pytest.approx(1.0)


def test_kde_benchmark_rows():
    rows = kde_benchmark(n_list=(50, 100), reps=2, seed=1)
    assert [(r["n"], r["rep"]) for r in rows] == [(50, 0), (50, 1), (100, 0), (100, 1)]
    assert all(0 < r["tv"] < 1 for r in rows)
    assert rows == kde_benchmark(n_list=(50, 100), reps=2, seed=1)


def test_group_config_validation():
    with pytest.raises(InvalidInput):
        GroupConfig(sigma1=-1.0)
    with pytest.raises(InvalidInput):
        GroupConfig(n_obs_per_subject=0)


def test_generate_group_deterministic():
    cfg = GroupConfig(n_subjects=5, n_obs_per_subject=20, seed=11)
    a, b = generate_group(cfg, label=0), generate_group(cfg, label=0)
    for x, y in zip(a, b):
        assert x.subject_id == y.subject_id
        np.testing.assert_array_equal(x.values, y.values)
        np.testing.assert_array_equal(x.covariates, y.covariates)


def test_degenerate_group_has_constant_subjects():
    cfg = GroupConfig(sigma1=0.0, sigma2=0.0, beta0_sd=0.0, n_subjects=10, n_obs_per_subject=8, seed=2)
    age, gender, obs, mu, var = draw_group(cfg)
    np.testing.assert_array_equal(var, 0.0)
    np.testing.assert_allclose(obs, np.repeat((0.1 * age + 2.0 * gender)[:, None], 8, axis=1))


def test_group_moments():
    cfg = GroupConfig(sigma1=0.3, n_subjects=400, n_obs_per_subject=500, seed=5)
    age, gender, obs, mu, var = draw_group(cfg)
    # observation variance matches the model on average
    ratio = obs.var(axis=1, ddof=1) / var
    assert ratio.mean() == pytest.approx(1.0, abs=0.02)
    # subject means concentrate on mu at the sqrt(n) rate
    z = (obs.mean(axis=1) - mu) / np.sqrt(var / obs.shape[1])
    assert z.mean() == pytest.approx(0.0, abs=0.2)
    assert z.std() == pytest.approx(1.0, abs=0.1)
    # standardised observations look normal
    std = ((obs - mu[:, None]) / np.sqrt(var)[:, None])[:20].ravel()
    assert stats.kstest(std, "norm").pvalue > 1e-3


def test_cell_seed_stable():
    assert cell_seed(1, 0.1, 0.2) == cell_seed(1, 0.1, 0.2)
    assert len({cell_seed(1, a, b) for a in (0.1, 0.3) for b in (0.1, 0.2)}) == 4
    assert cell_seed(1, 0.1, 0.2) != cell_seed(2, 0.1, 0.2)


def test_subject_quantiles_shapes():
    rng = np.random.default_rng(0)
    Q, conv = subject_quantiles([rng.normal(size=100) for _ in range(3)])
    assert Q.shape == (3, 1025) and conv.shape == (3,)
    Q, conv = subject_quantiles([])
    assert Q.shape == (0, 1025)


def test_experiment_config_dict():
    cfg = ExperimentConfig.from_dict({"n_subjects": 10, "nu1_grid": [0.1], "control": {"nu2": 3.0}})
    assert cfg.nu1_grid == (0.1,) and cfg.control.nu2 == 3.0
    big = ExperimentConfig.from_dict({"full_scale": True})
    assert (big.n_subjects, big.n_obs_per_subject) == (2000, 1000)
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_dict({"bogus": 1})
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_small_grid_gives_all_cells():
    cfg = ExperimentConfig(n_subjects=30, n_obs_per_subject=60, seed=3)
    rows = run_experiment(cfg)
    assert len(rows) == 24
    assert {(r["nu1"], r["sigma1"]) for r in rows} == {(a, b) for a in cfg.nu1_grid for b in cfg.sigma1_grid}
    assert all(0 <= r["acc_wf"] <= 1 and 0 <= r["acc_linear"] <= 1 for r in rows)


@pytest.mark.slow
def test_identical_groups_are_at_chance():
    accs = []
    for seed in range(3):
        cfg = ExperimentConfig(nu1_grid=(CONTROL_CONFIG.nu1,), sigma1_grid=(CONTROL_CONFIG.sigma1,),
                               case_nu2=CONTROL_CONFIG.nu2, case_sigma2=CONTROL_CONFIG.sigma2,
                               n_subjects=400, n_obs_per_subject=200, seed=seed)
        accs.append(run_experiment(cfg)[0]["acc_wf"])
    assert np.mean(accs) == pytest.approx(0.5, abs=0.07)


def test_variance_signal_favours_wasserstein():
    cfg = ExperimentConfig(nu1_grid=(0.1,), sigma1_grid=(0.6,), n_subjects=100,
                           n_obs_per_subject=200, seed=4)
    row = run_experiment(cfg)[0]
    assert row["acc_wf"] > row["acc_linear"]
