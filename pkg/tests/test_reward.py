"""Boosted-tree reward model: training, calibration, uncertainty."""

import numpy as np
import pytest

from cftrust.errors import ConfigError, DataError, SchemaMismatchError
from cftrust.reward import (
    RewardModel,
    RewardModelConfig,
    Tree,
    batch_uncertainty,
    calibrate_temperature,
    fit_temperature,
    load_model,
    save_model,
    train,
    uncertainty_margin,
)


def separable_data(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    x = x[np.abs(x) > 1e-3]
    y = (x > 0).astype(int)
    return x.reshape(-1, 1), y


@pytest.fixture(scope="module")
def toy_model():
    X, y = separable_data()
    return train(X, y, RewardModelConfig(n_trees=30, depth=2)), X, y


class TestTrain:
    def test_linearly_separable_reaches_perfect_training_accuracy(self, toy_model):
        model, X, y = toy_model
        assert np.mean(model.predict(X) == y) == 1.0

    def test_single_class_training_data_is_an_error(self):
        X = np.linspace(0, 1, 50).reshape(-1, 1)
        with pytest.raises(DataError, match="single class"):
            train(X, np.ones(50))

    def test_too_few_samples(self):
        X = np.linspace(0, 1, 10).reshape(-1, 1)
        with pytest.raises(DataError, match="at least 20"):
            train(X, (X[:, 0] > 0.5).astype(int))

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            train(np.zeros((30, 2)), np.zeros(29))

    def test_deterministic_across_runs(self):
        X, y = separable_data(300, seed=2)
        X = np.hstack([X, np.sin(7 * X), X**2])
        cfg = RewardModelConfig(n_trees=40, depth=3)
        a, b = train(X, y, cfg), train(X, y, cfg)
        assert len(a.trees) == len(b.trees)
        for ta, tb in zip(a.trees, b.trees):
            assert np.array_equal(ta.feature, tb.feature)
            assert np.array_equal(ta.threshold, tb.threshold)
            assert np.array_equal(ta.value, tb.value)
        probe = np.random.default_rng(3).normal(size=(50, 3))
        assert a.predict_proba(probe).tobytes() == b.predict_proba(probe).tobytes()

    def test_training_loss_nonincreasing_per_round(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(400, 6))
        y = ((X[:, 0] + 0.5 * X[:, 1] + 0.2 * rng.normal(size=400)) > 0).astype(int)
        model = train(X, y, RewardModelConfig(n_trees=80, depth=3))
        curve = np.array(model.train_curve)
        assert np.all(np.diff(curve) <= 1e-12)

    def test_early_stopping_returns_best_validation_round(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(300, 4))
        y = (X[:, 0] > 0).astype(int)
        model = train(X, y, RewardModelConfig(n_trees=200, depth=4, early_stop_patience=5))
        best = int(np.argmin(model.val_curve))
        assert len(model.trees) == best + 1


class TestPredictProba:
    def test_probabilities_sum_to_one(self, toy_model):
        model, X, _ = toy_model
        p = model.predict_proba(X)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_huge_temperature_limit_is_uniform(self, toy_model):
        model, X, _ = toy_model
        from dataclasses import replace

        hot = replace(model, temperature=1e6)
        p = hot.predict_proba(X)
        assert np.allclose(p, 0.5, atol=1e-3)

    def test_zero_trees_gives_exactly_half(self):
        model = RewardModel(trees=[], learning_rate=0.1, n_features=3)
        p = model.predict_proba(np.zeros((4, 3)))
        assert np.array_equal(p, np.full((4, 2), 0.5))

    def test_dimension_mismatch(self, toy_model):
        model, _, _ = toy_model
        with pytest.raises(DataError, match="dimension"):
            model.predict_proba(np.zeros((2, 7)))


class TestCalibration:
    def test_recovers_unit_temperature_on_calibrated_logits(self):
        # Labels sampled from logistic(logit) make the raw logits perfectly
        # calibrated, so the NLL minimizer must sit near T = 1.
        rng = np.random.default_rng(11)
        z = rng.normal(0.0, 2.0, size=4000)
        y = (rng.random(4000) < 1.0 / (1.0 + np.exp(-z))).astype(float)
        t = fit_temperature(z, y)
        assert 0.9 <= t <= 1.1

    def test_overconfident_logits_need_temperature_above_one(self):
        rng = np.random.default_rng(12)
        z = rng.normal(0.0, 2.0, size=4000)
        y = (rng.random(4000) < 1.0 / (1.0 + np.exp(-z))).astype(float)
        t = fit_temperature(5.0 * z, y)
        assert t > 1.0

    def test_argmax_predictions_unchanged_for_every_sample(self, toy_model):
        model, X, y = toy_model
        calibrated = calibrate_temperature(model, X, y)
        assert np.array_equal(model.predict(X), calibrated.predict(X))

    def test_single_class_validation_is_an_error(self, toy_model):
        model, X, _ = toy_model
        with pytest.raises(DataError):
            calibrate_temperature(model, X, np.ones(len(X)))


class TestUncertainty:
    def test_hand_values(self):
        assert uncertainty_margin(np.array([1.0, 0.0])) == 0.0
        assert uncertainty_margin(np.array([0.5, 0.5])) == 1.0
        assert abs(uncertainty_margin(np.array([0.7, 0.3])) - 0.6) < 1e-12

    def test_margin_consistency_with_complement(self):
        # u must equal 1 - (p_max - p_second) exactly, row by row.
        rng = np.random.default_rng(13)
        p1 = rng.random(100)
        probs = np.column_stack([1 - p1, p1])
        u = uncertainty_margin(probs)
        margin = np.abs(probs[:, 0] - probs[:, 1])
        assert np.array_equal(u, 1.0 - margin)

    def test_batch_uncertainty_is_the_mean(self, toy_model):
        model, X, _ = toy_model
        u = uncertainty_margin(model.predict_proba(X))
        assert batch_uncertainty(model, X) == pytest.approx(float(np.mean(u)), abs=1e-12)

    def test_empty_batch_is_an_error(self, toy_model):
        model, _, _ = toy_model
        with pytest.raises(DataError):
            batch_uncertainty(model, np.zeros((0, 1)))


class TestSerialization:
    def test_round_trip_preserves_predictions(self, toy_model, tmp_path):
        model, X, y = toy_model
        model = calibrate_temperature(model, X, y)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path, expected_schema_hash=model.schema_hash)
        assert loaded.temperature == model.temperature
        assert np.array_equal(loaded.predict_proba(X), model.predict_proba(X))

    def test_schema_hash_mismatch_is_an_error(self, toy_model, tmp_path):
        model, _, _ = toy_model
        path = tmp_path / "model.json"
        save_model(model, path)
        with pytest.raises(SchemaMismatchError):
            load_model(path, expected_schema_hash="not-the-hash")


def test_config_validation():
    with pytest.raises(ConfigError):
        RewardModelConfig(split=1.0).validate()
    with pytest.raises(ConfigError):
        RewardModelConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigError):
        RewardModelConfig(n_trees=0).validate()


def test_hand_built_tree_predicts_by_threshold():
    tree = Tree(
        feature=np.array([0, -1, -1], dtype=np.int32),
        threshold=np.array([0.5, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        value=np.array([0.0, -1.0, 1.0]),
    )
    X = np.array([[0.2], [0.5], [0.9]])
    assert tree.predict(X).tolist() == [-1.0, -1.0, 1.0]
