import numpy as np
import pytest
from sklearn.base import clone

from neurowf import InsufficientData, InvalidInput
from neurowf.ensemble import (
    BinaryRandomForest,
    PredictionMatrix,
    fit_forest,
    forest_votes,
    predict_forest,
)
from neurowf.simulation import simulate_channel_decisions


def noisy_with_signal(rng, n=200, p=10, col=3):
    y = np.r_[np.zeros(n // 2, int), np.ones(n - n // 2, int)]
    Z = rng.integers(0, 2, (n, p))
    Z[:, col] = y
    return Z, y


def test_prediction_matrix_validation():
    with pytest.raises(InvalidInput):
        PredictionMatrix(np.array([[0, 2]]), ("a", "b"))
    with pytest.raises(InvalidInput):
        PredictionMatrix(np.zeros((2, 2)), ("a",))
    m = PredictionMatrix(np.eye(3, dtype=int), ("a", "b", "c"))
    assert m.values.dtype == np.int8
    np.testing.assert_array_equal(m.select(["c", "a"]).values, np.eye(3)[:, [2, 0]])


def test_perfect_column_gives_perfect_training_accuracy(rng):
    Z, y = noisy_with_signal(rng)
    model = fit_forest(Z, y, n_trees=50, seed=1)
    assert np.mean(predict_forest(model, Z) == y) == 1.0


def test_random_labels_oob_near_chance():
    rng = np.random.default_rng(4)
    Z = rng.integers(0, 2, (400, 20))
    y = rng.permutation(np.r_[np.zeros(200, int), np.ones(200, int)])
    oob = BinaryRandomForest(n_trees=100, seed=0).fit(Z, y).oob_score_
    assert 0.35 <= oob <= 0.65


def test_oob_high_on_predictive_data(rng):
    Z, y = noisy_with_signal(rng, n=300, p=8)
    assert BinaryRandomForest(n_trees=60, features_per_split=8).fit(Z, y).oob_score_ >= 0.95


def test_deterministic(rng):
    Z, y = noisy_with_signal(rng)
    y = y.copy()
    y[rng.choice(y.size, 30, replace=False)] ^= 1
    a = forest_votes(fit_forest(Z, y, n_trees=20, seed=7), Z)
    b = forest_votes(fit_forest(Z, y, n_trees=20, seed=7), Z)
    np.testing.assert_array_equal(a, b)


def test_single_tree_forest_matches_tree(rng):
    Z, y = noisy_with_signal(rng)
    model = fit_forest(Z, y, n_trees=1, seed=3)
    np.testing.assert_array_equal(predict_forest(model, Z), model.trees[0].predict(Z))


@pytest.mark.parametrize("depth", [1, 2, 4])
def test_max_depth_respected(rng, depth):
    Z = rng.integers(0, 2, (200, 12))
    y = rng.integers(0, 2, 200)
    model = fit_forest(Z, y, n_trees=10, max_depth=depth, seed=0)
    assert all(t.depth <= depth for t in model.trees)


def test_column_permutation_invariance(rng):
    # all features considered at every split, single informative column:
    # the fitted rule must follow the column wherever it is placed
    Z, y = noisy_with_signal(rng, n=120, p=6, col=0)
    perm = rng.permutation(6)
    a = predict_forest(fit_forest(Z, y, n_trees=1, features_per_split=6, seed=2), Z)
    b = predict_forest(fit_forest(Z[:, perm], y, n_trees=1, features_per_split=6, seed=2), Z[:, perm])
    np.testing.assert_array_equal(a, b)


def test_errors(rng):
    Z, y = noisy_with_signal(rng)
    model = fit_forest(Z, y, n_trees=3)
    with pytest.raises(InvalidInput):
        predict_forest(model, Z[:, :5])
    with pytest.raises(InsufficientData):
        fit_forest(Z, np.zeros(len(y), int))
    with pytest.raises(InvalidInput):
        fit_forest(Z, y, features_per_split=99)
    with pytest.raises(InvalidInput):
        fit_forest(Z, y[:-1])


def test_vote_tie_goes_to_control():
    Z = np.array([[0], [0], [1], [1]])
    y = [0, 0, 1, 1]
    model = fit_forest(Z, y, n_trees=2, seed=0)
    votes = forest_votes(model, Z)
    pred = predict_forest(model, Z)
    tied = votes.sum(axis=0) == 1
    assert np.all(pred[tied] == 0)


def test_estimator_api(rng):
    Z, y = noisy_with_signal(rng)
    est = clone(BinaryRandomForest(n_trees=10))
    assert est.get_params()["n_trees"] == 10
    assert est.fit(Z, y).score(Z, y) == 1.0


def test_channel_simulation_layout():
    pm, y = simulate_channel_decisions(n_subjects=40, n_regions=5, n_bands=3, seed=1)
    assert pm.values.shape == (40, 15)
    assert pm.column_names[:2] == ("b0_r00", "b0_r01") and pm.column_names[5] == "b1_r00"
    assert y.sum() == 20
