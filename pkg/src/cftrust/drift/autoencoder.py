"""Denoising autoencoders for batch-level drift detection.

Two variants trained on clean-reference features only:

* plain: dense encoder (tanh) into a bottleneck, linear decoder, trained
  to reconstruct the clean input from a noise-corrupted copy (Gaussian
  noise plus dropout zeroing).
* attention: the input vector is treated as a sequence of fixed-size
  chunks, passed through one single-head self-attention layer, then the
  same dense bottleneck/decoder. Its objective adds a variance penalty
  eta * Var(x_hat), where Var is the across-batch variance of each
  reconstructed component averaged over components.

All gradients are hand-derived; `loss_and_grads` is written to be checked
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, NumericDivergenceError

VARIANTS = ("plain", "attention")


@dataclass
class AutoencoderConfig:
    variant: str = "plain"
    bottleneck_dim: int = 32
    noise_sigma: float = 0.05
    dropout: float = 0.1
    epochs: int = 200
    step_size: float = 1e-2
    batch_size: int = 32
    eta: float = 0.1
    chunk_dim: int = 16

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown autoencoder variant {self.variant!r}")
        if self.bottleneck_dim < 1:
            raise ConfigError("bottleneck dimension must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout rate must be in [0, 1)")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise sigma must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be >= 1")
        if self.step_size <= 0.0:
            raise ConfigError("step size must be positive")
        if self.eta < 0.0:
            raise ConfigError("variance penalty eta must be nonnegative")
        if self.chunk_dim < 1:
            raise ConfigError("chunk dimension must be >= 1")


def attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray, d_k: int) -> np.ndarray:
    """Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V, row-wise."""
    Q, K, V = (np.asarray(m, dtype=np.float64) for m in (Q, K, V))
    if Q.ndim != 2 or K.ndim != 2 or V.ndim != 2:
        raise DataError("attention expects 2-D matrices")
    if Q.shape[1] != K.shape[1] or K.shape[0] != V.shape[0]:
        raise DataError(
            f"attention shapes are inconsistent: Q{Q.shape} K{K.shape} V{V.shape}"
        )
    scores = Q @ K.T / np.sqrt(float(d_k))
    return _softmax_rows(scores) @ V


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def init_params(
    variant: str,
    input_dim: int,
    bottleneck_dim: int,
    chunk_dim: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    if bottleneck_dim >= input_dim:
        raise ConfigError(
            f"bottleneck ({bottleneck_dim}) must be smaller than the input ({input_dim})"
        )
    d_enc = input_dim
    params: dict[str, np.ndarray] = {}
    if variant == "attention":
        c = chunk_dim
        seq = -(-input_dim // c)
        d_enc = seq * c
        params["Wq"] = rng.normal(0.0, 0.1 / np.sqrt(c), size=(c, c))
        params["Wk"] = rng.normal(0.0, 0.1 / np.sqrt(c), size=(c, c))
        # Start the value projection near identity so signal flows from epoch 0.
        params["Wv"] = 0.5 * np.eye(c) + rng.normal(0.0, 0.1 / np.sqrt(c), size=(c, c))
    params["W1"] = rng.normal(0.0, 1.0 / np.sqrt(d_enc), size=(d_enc, bottleneck_dim))
    params["b1"] = np.zeros(bottleneck_dim)
    params["W2"] = rng.normal(0.0, 1.0 / np.sqrt(bottleneck_dim), size=(bottleneck_dim, input_dim))
    params["b2"] = np.zeros(input_dim)
    return params


def _pad_chunks(X: np.ndarray, chunk_dim: int) -> np.ndarray:
    n, d = X.shape
    seq = -(-d // chunk_dim)
    if seq * chunk_dim == d:
        return X.reshape(n, seq, chunk_dim)
    padded = np.zeros((n, seq * chunk_dim))
    padded[:, :d] = X
    return padded.reshape(n, seq, chunk_dim)


def forward(
    params: dict[str, np.ndarray],
    X: np.ndarray,
    variant: str,
    chunk_dim: int,
) -> np.ndarray:
    """Reconstruction of X (no corruption applied here)."""
    if variant == "attention":
        Xc = _pad_chunks(X, chunk_dim)
        c = chunk_dim
        Qm, Km, Vm = Xc @ params["Wq"], Xc @ params["Wk"], Xc @ params["Wv"]
        A = _softmax_rows(Qm @ Km.transpose(0, 2, 1) / np.sqrt(float(c)))
        H = (A @ Vm).reshape(len(X), -1)
    else:
        H = X
    Z = np.tanh(H @ params["W1"] + params["b1"])
    return Z @ params["W2"] + params["b2"]


def loss_and_grads(
    params: dict[str, np.ndarray],
    X_noisy: np.ndarray,
    X_clean: np.ndarray,
    variant: str,
    chunk_dim: int,
    eta: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Denoising objective and its analytic parameter gradients.

    Loss = mean_i ||x_clean_i - x_hat_i||^2 + eta * mean_j Var_j(x_hat),
    Var taken (biased) across the batch per reconstructed component.
    """
    n, d = X_clean.shape
    grads: dict[str, np.ndarray] = {}

    if variant == "attention":
        c = chunk_dim
        Xc = _pad_chunks(X_noisy, chunk_dim)
        Qm, Km, Vm = Xc @ params["Wq"], Xc @ params["Wk"], Xc @ params["Wv"]
        scores = Qm @ Km.transpose(0, 2, 1) / np.sqrt(float(c))
        A = _softmax_rows(scores)
        Hc = A @ Vm
        H = Hc.reshape(n, -1)
    else:
        H = X_noisy

    pre = H @ params["W1"] + params["b1"]
    Z = np.tanh(pre)
    Xhat = Z @ params["W2"] + params["b2"]

    resid = Xhat - X_clean
    recon = float(np.sum(resid**2) / n)
    mu = Xhat.mean(axis=0)
    var_term = float(np.mean(np.mean((Xhat - mu) ** 2, axis=0)))
    loss = recon + eta * var_term

    dXhat = 2.0 * resid / n
    if eta > 0.0:
        dXhat = dXhat + eta * (2.0 / (n * d)) * (Xhat - mu)

    grads["W2"] = Z.T @ dXhat
    grads["b2"] = dXhat.sum(axis=0)
    dZ = dXhat @ params["W2"].T
    dpre = dZ * (1.0 - Z**2)
    grads["W1"] = H.T @ dpre
    grads["b1"] = dpre.sum(axis=0)

    if variant == "attention":
        dH = (dpre @ params["W1"].T).reshape(Hc.shape)
        dA = dH @ Vm.transpose(0, 2, 1)
        dV = A.transpose(0, 2, 1) @ dH
        dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True))
        dS = dS / np.sqrt(float(c))
        dQ = dS @ Km
        dK = dS.transpose(0, 2, 1) @ Qm
        grads["Wq"] = np.einsum("nsc,nsk->ck", Xc, dQ)
        grads["Wk"] = np.einsum("nsc,nsk->ck", Xc, dK)
        grads["Wv"] = np.einsum("nsc,nsk->ck", Xc, dV)

    return loss, grads


@dataclass
class AutoencoderModel:
    """Trained autoencoder plus the input scaling fit on the clean data."""

    variant: str
    params: dict[str, np.ndarray]
    input_dim: int
    bottleneck_dim: int
    chunk_dim: int
    noise_sigma: float
    dropout: float
    eta: float
    scale_min: np.ndarray
    scale_range: np.ndarray
    epoch_losses: list[float] = field(default_factory=list, repr=False)

    def _scale(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DataError(
                f"autoencoder expects {self.input_dim} columns, got {X.shape[1]}"
            )
        return (X - self.scale_min) / self.scale_range

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        """Noise-free reconstruction in the scaled feature space."""
        return forward(self.params, self._scale(X), self.variant, self.chunk_dim)

    def reconstruction_errors(self, X: np.ndarray) -> np.ndarray:
        """Per-sample squared reconstruction error (scaled space)."""
        Xs = self._scale(X)
        xhat = forward(self.params, Xs, self.variant, self.chunk_dim)
        return np.sum((Xs - xhat) ** 2, axis=1)

    def mean_reconstruction_error(self, X: np.ndarray) -> float:
        if len(X) == 0:
            raise DataError("cannot evaluate an empty batch")
        return float(np.mean(self.reconstruction_errors(X)))

    def batch_loss(self, X: np.ndarray) -> float:
        """Evaluation-time objective: mean squared error plus the variance
        penalty (eta is 0 for the plain variant, so this reduces to MSE)."""
        if len(X) == 0:
            raise DataError("cannot evaluate an empty batch")
        Xs = self._scale(X)
        xhat = forward(self.params, Xs, self.variant, self.chunk_dim)
        recon = float(np.mean(np.sum((Xs - xhat) ** 2, axis=1)))
        var_term = float(np.mean(np.var(xhat, axis=0)))
        return recon + self.eta * var_term


def train_autoencoder(
    clean_features: np.ndarray,
    config: AutoencoderConfig,
    rng_seed: int,
) -> AutoencoderModel:
    """Train on clean reference features with seeded corruption and SGD.

    The input is min-max scaled using the clean features themselves; the
    scaling is stored on the model so later batches are judged in the same
    space. Raises NumericDivergenceError if the loss goes non-finite.
    """
    config.validate()
    X = np.atleast_2d(np.asarray(clean_features, dtype=np.float64))
    n, d = X.shape
    if n < 2:
        raise DataError("need at least 2 rows to train an autoencoder")

    scale_min = X.min(axis=0)
    scale_range = np.maximum(X.max(axis=0) - scale_min, 1e-12)
    Xs = (X - scale_min) / scale_range

    rng = np.random.default_rng(rng_seed)
    eta = config.eta if config.variant == "attention" else 0.0
    params = init_params(config.variant, d, config.bottleneck_dim, config.chunk_dim, rng)

    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, config.batch_size):
            batch = Xs[order[start : start + config.batch_size]]
            noisy = batch + config.noise_sigma * rng.standard_normal(batch.shape)
            if config.dropout > 0.0:
                noisy = noisy * (rng.random(batch.shape) >= config.dropout)
            loss, grads = loss_and_grads(
                params, noisy, batch, config.variant, config.chunk_dim, eta
            )
            if not np.isfinite(loss):
                raise NumericDivergenceError(
                    f"autoencoder loss diverged at epoch {epoch} "
                    f"(variant={config.variant}, step_size={config.step_size})"
                )
            for name, grad in grads.items():
                params[name] -= config.step_size * grad
            total += loss * len(batch)
            seen += len(batch)
        epoch_losses.append(total / seen)

    return AutoencoderModel(
        variant=config.variant,
        params=params,
        input_dim=d,
        bottleneck_dim=config.bottleneck_dim,
        chunk_dim=config.chunk_dim,
        noise_sigma=config.noise_sigma,
        dropout=config.dropout,
        eta=eta,
        scale_min=scale_min,
        scale_range=scale_range,
        epoch_losses=epoch_losses,
    )


def reconstruction_drift(
    model: AutoencoderModel,
    batch_features: np.ndarray,
    train_reference_error: float,
) -> float:
    """Mean batch reconstruction error minus the clean-training reference.

    Positive values mean the batch reconstructs worse than the data the
    model was fit on; a batch identical to the training set gives 0.
    """
    return model.mean_reconstruction_error(batch_features) - train_reference_error
