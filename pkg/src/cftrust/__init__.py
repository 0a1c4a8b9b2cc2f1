"""cftrust: counterfactual trust scoring for reward models.

Batches a labeled news-style dataset temporally, optionally injects
controlled bias, trains a boosted-tree reward classifier plus two
autoencoder drift detectors, and reports per-batch trust scores with
full diagnostics.
"""

__version__ = "0.1.0"

from .errors import (
    CftrustError,
    ConfigError,
    DataError,
    NumericDivergenceError,
    SchemaMismatchError,
    StageFailure,
)

__all__ = [
    "__version__",
    "CftrustError",
    "ConfigError",
    "DataError",
    "NumericDivergenceError",
    "SchemaMismatchError",
    "StageFailure",
]
