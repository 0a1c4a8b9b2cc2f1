from .metrics import Histogram, build_histogram, jsd, psi
from .autoencoder import (
    AutoencoderConfig,
    AutoencoderModel,
    attention,
    reconstruction_drift,
    train_autoencoder,
)
from .score import BatchDrift, DivergenceBaseline, DriftNormalizer, DriftReport, drift_score

__all__ = [
    "Histogram",
    "build_histogram",
    "psi",
    "jsd",
    "AutoencoderConfig",
    "AutoencoderModel",
    "attention",
    "train_autoencoder",
    "reconstruction_drift",
    "BatchDrift",
    "DivergenceBaseline",
    "DriftNormalizer",
    "DriftReport",
    "drift_score",
]
