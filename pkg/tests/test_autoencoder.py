"""Autoencoder gradients vs finite differences, attention oracle, drift."""

import math

import numpy as np
import pytest

from cftrust.drift.autoencoder import (
    AutoencoderConfig,
    attention,
    forward,
    init_params,
    loss_and_grads,
    reconstruction_drift,
    train_autoencoder,
)
from cftrust.errors import ConfigError, DataError, NumericDivergenceError

FD_STEP = 1e-5


def finite_difference_grads(params, X_noisy, X_clean, variant, chunk_dim, eta):
    """Central-difference gradient of the loss for every parameter entry."""
    grads = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat = value.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + FD_STEP
            up, _ = loss_and_grads(params, X_noisy, X_clean, variant, chunk_dim, eta)
            flat[i] = orig - FD_STEP
            down, _ = loss_and_grads(params, X_noisy, X_clean, variant, chunk_dim, eta)
            flat[i] = orig
            g.ravel()[i] = (up - down) / (2 * FD_STEP)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradient_check(variant, eta, seed):
    rng = np.random.default_rng(seed)
    params = init_params(variant, input_dim=4, bottleneck_dim=2, chunk_dim=2, rng=rng)
    X_clean = rng.normal(size=(5, 4))
    X_noisy = X_clean + 0.1 * rng.normal(size=(5, 4))
    _, analytic = loss_and_grads(params, X_noisy, X_clean, variant, 2, eta)
    numeric = finite_difference_grads(params, X_noisy, X_clean, variant, 2, eta)
    return max_relative_error(analytic, numeric)


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_plain_variant_gradients(self, seed):
        assert gradient_check("plain", 0.0, seed) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_attention_variant_gradients_with_variance_term(self, seed):
        assert gradient_check("attention", 0.1, seed + 100) < 1e-4

    def test_eta_zero_reduces_objective_to_reconstruction_mse(self):
        rng = np.random.default_rng(0)
        params = init_params("attention", 8, 3, 2, rng)
        X = rng.normal(size=(6, 8))
        loss, _ = loss_and_grads(params, X, X, "attention", 2, eta=0.0)
        xhat = forward(params, X, "attention", 2)
        assert loss == pytest.approx(float(np.mean(np.sum((X - xhat) ** 2, axis=1))), abs=1e-12)


class TestAttention:
    def test_single_token_scalar(self):
        out = attention(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]), 1)
        assert np.array_equal(out, np.array([[1.0]]))

    def test_uniform_scores_return_row_mean_of_values(self):
        # All-zero queries make every score equal; with a power-of-two number
        # of rows the softmax weights are exactly 1/s, so the output equals
        # the row-mean of V bit for bit.
        rng = np.random.default_rng(1)
        V = rng.normal(size=(4, 3))
        out = attention(np.zeros((2, 5)), np.zeros((4, 5)), V, 5)
        expected = V.sum(axis=0) / 4.0
        assert np.array_equal(out[0], expected)
        assert np.array_equal(out[1], expected)

    def test_two_token_hand_example(self):
        # Q = K = I2, V = I2, d_k = 2: row 0 scores are [1,0]/sqrt(2), so the
        # first weight is e^(1/sqrt(2)) / (e^(1/sqrt(2)) + 1).
        eye = np.eye(2)
        out = attention(eye, eye, eye, 2)
        w = math.exp(1.0 / math.sqrt(2.0)) / (math.exp(1.0 / math.sqrt(2.0)) + 1.0)
        expected = np.array([[w, 1.0 - w], [1.0 - w, w]])
        assert np.max(np.abs(out - expected)) < 1e-9

    def test_matches_brute_force_on_random_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            s, t, dk, dv = rng.integers(1, 6, size=4)
            Q = rng.normal(size=(s, dk))
            K = rng.normal(size=(t, dk))
            V = rng.normal(size=(t, dv))
            expected = np.zeros((s, dv))
            for i in range(s):
                scores = [float(Q[i] @ K[j]) / math.sqrt(dk) for j in range(t)]
                mx = max(scores)
                ws = [math.exp(v - mx) for v in scores]
                z = sum(ws)
                for j in range(t):
                    expected[i] += (ws[j] / z) * V[j]
            assert np.max(np.abs(attention(Q, K, V, int(dk)) - expected)) < 1e-9

    def test_dimension_mismatch_is_an_error(self):
        with pytest.raises(DataError):
            attention(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 2)), 3)
        with pytest.raises(DataError):
            attention(np.zeros((2, 3)), np.zeros((4, 3)), np.zeros((3, 2)), 3)


def rank_one_data(n=400, d=8, seed=5):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 1))
    v = rng.normal(size=(1, d))
    return u @ v


class TestTraining:
    def test_rank_one_data_compresses_through_one_dimension(self):
        X = rank_one_data()
        cfg = AutoencoderConfig(
            variant="plain", bottleneck_dim=1, noise_sigma=0.0, dropout=0.0,
            epochs=300, step_size=0.05, batch_size=32,
        )
        model = train_autoencoder(X, cfg, rng_seed=2)
        scaled = (X - model.scale_min) / model.scale_range
        total_variance = float(np.sum(np.var(scaled, axis=0)))
        assert model.mean_reconstruction_error(X) < 0.01 * total_variance

    def test_epoch_loss_decreases_over_first_five_epochs(self):
        X = rank_one_data(seed=6)
        cfg = AutoencoderConfig(
            variant="plain", bottleneck_dim=1, noise_sigma=0.05, dropout=0.1,
            epochs=6, step_size=0.02, batch_size=32,
        )
        model = train_autoencoder(X, cfg, rng_seed=3)
        losses = model.epoch_losses[:5]
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_bottleneck_must_be_smaller_than_input(self):
        X = rank_one_data(n=50)
        cfg = AutoencoderConfig(variant="plain", bottleneck_dim=8)
        with pytest.raises(ConfigError):
            train_autoencoder(X, cfg, rng_seed=0)

    def test_divergence_raises_with_diagnostics(self):
        X = rank_one_data(n=100)
        cfg = AutoencoderConfig(
            variant="plain", bottleneck_dim=2, epochs=50, step_size=1e9, batch_size=16,
        )
        with pytest.raises(NumericDivergenceError, match="epoch"):
            with np.errstate(all="ignore"):
                train_autoencoder(X, cfg, rng_seed=0)

    def test_training_is_deterministic_under_seed(self):
        X = rank_one_data(n=120)
        cfg = AutoencoderConfig(variant="attention", bottleneck_dim=2, chunk_dim=4, epochs=5)
        a = train_autoencoder(X, cfg, rng_seed=11)
        b = train_autoencoder(X, cfg, rng_seed=11)
        assert a.epoch_losses == b.epoch_losses
        for k in a.params:
            assert np.array_equal(a.params[k], b.params[k])


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(600, 10))
    cfg = AutoencoderConfig(variant="plain", bottleneck_dim=4, epochs=60, batch_size=32)
    model = train_autoencoder(X, cfg, rng_seed=4)
    return model, X, rng


class TestReconstructionDrift:
    def test_batch_identical_to_training_set_gives_exactly_zero(self, trained):
        model, X, _ = trained
        ref = model.mean_reconstruction_error(X)
        assert reconstruction_drift(model, X, ref) == 0.0

    def test_in_distribution_batch_stays_within_three_standard_errors(self, trained):
        model, X, rng = trained
        ref = model.mean_reconstruction_error(X)
        batch = rng.normal(size=(100, 10))
        errors = model.reconstruction_errors(batch)
        se = float(np.std(errors, ddof=1) / math.sqrt(len(errors)))
        delta = reconstruction_drift(model, batch, ref)
        assert abs(delta) < 3.0 * se

    def test_shifted_batch_reconstructs_worse(self, trained):
        model, X, rng = trained
        ref = model.mean_reconstruction_error(X)
        shifted = rng.normal(size=(300, 10)) + 5.0
        assert reconstruction_drift(model, shifted, ref) > 0.0

    def test_empty_batch_is_an_error(self, trained):
        model, _, _ = trained
        with pytest.raises(DataError):
            model.mean_reconstruction_error(np.zeros((0, 10)))
