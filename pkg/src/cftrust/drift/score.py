"""Per-batch drift aggregation and the normalized drift score.

PSI and JSD are computed per feature column (against reference histograms
fit on the clean prefix) and on the label distribution, then averaged.
The four raw metrics (psi, jsd, ae_delta, tae_loss) are min-max scaled
with the clean-prefix minimum and the running maximum, weighted, and
clamped into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from .metrics import DEFAULT_BINS, Histogram, build_histogram, jsd, psi

METRIC_NAMES = ("psi", "jsd", "ae_delta", "tae_loss")

_LABEL_EDGES = np.array([-0.5, 0.5, 1.5])


@dataclass
class DivergenceBaseline:
    """Reference histograms per feature column plus the label histogram."""

    column_histograms: list[Histogram]
    label_histogram: Histogram

    @classmethod
    def fit(cls, reference: np.ndarray, labels: np.ndarray, bins: int = DEFAULT_BINS) -> "DivergenceBaseline":
        reference = np.atleast_2d(np.asarray(reference, dtype=np.float64))
        cols = [build_histogram(reference[:, j], bins=bins) for j in range(reference.shape[1])]
        lab = build_histogram(np.asarray(labels, dtype=np.float64), reference_edges=_LABEL_EDGES)
        return cls(column_histograms=cols, label_histogram=lab)

    def compare(self, batch: np.ndarray, batch_labels: np.ndarray) -> tuple[float, float]:
        """Average PSI and JSD of the batch against the reference, over all
        feature columns and the label distribution."""
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        if batch.shape[1] != len(self.column_histograms):
            raise DataError(
                f"batch has {batch.shape[1]} columns, baseline has {len(self.column_histograms)}"
            )
        psis, jsds = [], []
        for j, ref in enumerate(self.column_histograms):
            actual = build_histogram(batch[:, j], reference_edges=ref.bin_edges)
            psis.append(psi(ref, actual))
            jsds.append(jsd(ref, actual))
        actual_lab = build_histogram(
            np.asarray(batch_labels, dtype=np.float64), reference_edges=_LABEL_EDGES
        )
        psis.append(psi(self.label_histogram, actual_lab))
        jsds.append(jsd(self.label_histogram, actual_lab))
        return float(np.mean(psis)), float(np.mean(jsds))


@dataclass
class DriftNormalizer:
    """Clean-prefix minima and running maxima for each raw drift metric."""

    clean_min: dict[str, float]
    running_max: dict[str, float]

    @classmethod
    def from_clean_prefix(cls, rows: list[dict[str, float]]) -> "DriftNormalizer":
        if not rows:
            raise ConfigError("drift normalizer needs at least one clean-prefix row")
        mins = {m: min(r[m] for r in rows) for m in METRIC_NAMES}
        return cls(clean_min=mins, running_max=dict(mins))

    def observe(self, row: dict[str, float]) -> None:
        for m in METRIC_NAMES:
            if row[m] > self.running_max[m]:
                self.running_max[m] = row[m]

    def scale(self, metric: str, value: float) -> float:
        lo = self.clean_min[metric]
        hi = self.running_max[metric]
        if hi <= lo:
            return 0.0
        return float(np.clip((value - lo) / (hi - lo), 0.0, 1.0))


def drift_score(
    psi_value: float,
    jsd_value: float,
    ae_delta: float,
    tae_loss: float,
    normalizer: DriftNormalizer,
    weights: dict[str, float] | None = None,
) -> float:
    """Weighted mean of min-max-scaled drift metrics, clamped to [0, 1].

    Weights default to equal; they must be nonnegative and sum to 1.
    """
    if weights is None:
        weights = {m: 0.25 for m in METRIC_NAMES}
    if set(weights) != set(METRIC_NAMES):
        raise ConfigError(f"drift weights must cover exactly {METRIC_NAMES}")
    total = sum(weights.values())
    if any(w < 0 for w in weights.values()) or abs(total - 1.0) > 1e-9:
        raise ConfigError("drift weights must be nonnegative and sum to 1")
    values = {"psi": psi_value, "jsd": jsd_value, "ae_delta": ae_delta, "tae_loss": tae_loss}
    score = sum(weights[m] * normalizer.scale(m, values[m]) for m in METRIC_NAMES)
    return float(np.clip(score, 0.0, 1.0))


@dataclass
class BatchDrift:
    """Raw and normalized drift numbers for one batch."""

    batch: int
    psi: float
    jsd: float
    ae_delta: float
    tae_loss: float
    drift: float

    def to_dict(self) -> dict:
        return {
            "batch": self.batch,
            "psi": self.psi,
            "jsd": self.jsd,
            "ae_delta": self.ae_delta,
            "tae_loss": self.tae_loss,
            "drift": self.drift,
        }


@dataclass
class DriftReport:
    rows: list[BatchDrift] = field(default_factory=list)

    def validate(self) -> None:
        for row in self.rows:
            if row.psi < 0:
                raise DataError(f"batch {row.batch}: psi must be nonnegative")
            if not 0.0 <= row.jsd <= np.log(2.0) + 1e-9:
                raise DataError(f"batch {row.batch}: jsd outside [0, ln 2]")
            if not 0.0 <= row.drift <= 1.0:
                raise DataError(f"batch {row.batch}: drift score outside [0, 1]")

    def to_csv(self) -> str:
        lines = ["batch,psi,jsd,ae_delta,tae_loss,drift"]
        for r in self.rows:
            lines.append(
                f"{r.batch},{r.psi!r},{r.jsd!r},{r.ae_delta!r},{r.tae_loss!r},{r.drift!r}"
            )
        return "\n".join(lines) + "\n"
