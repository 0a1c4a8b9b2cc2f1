"""Composite trust scoring: fairness violations, counterfactual
consistency, the weighted trust score, EMA smoothing, and permutation
feature importance.

The trust score for a batch is

    T = 1 - (alpha*D + beta*u + gamma*R + delta*E + zeta*C)

with all five components in [0, 1] and the weights summing to 1, so T is
guaranteed to land in [0, 1]. R is the hard counterfactual violation rate
(argmax flips under a protected-attribute flip); C is the soft companion
(mean absolute probability change under the same flip).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .reward import RewardModel


@dataclass
class TrustWeights:
    """Weights for (drift D, uncertainty u, fairness R, error E,
    counterfactual C). Must be in [0, 1] and sum to 1."""

    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 0.2
    delta: float = 0.2
    zeta: float = 0.2

    def __post_init__(self):
        values = self.as_tuple()
        if any(not 0.0 <= w <= 1.0 for w in values):
            raise ConfigError("trust weights must lie in [0, 1]")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ConfigError(f"trust weights must sum to 1, got {sum(values)!r}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta, self.zeta)


def _flip_protected(X: np.ndarray, protected_col: int) -> np.ndarray:
    flipped = np.array(X, dtype=np.float64, copy=True)
    col = flipped[:, protected_col]
    if not np.all(np.isin(col, (0.0, 1.0))):
        raise DataError("protected column must be binary 0/1 to flip")
    flipped[:, protected_col] = 1.0 - col
    return flipped


def fairness_violation_rate(model: RewardModel, X: np.ndarray, protected_col: int) -> float:
    """Fraction of records whose argmax prediction changes when the
    protected attribute is flipped."""
    if len(X) == 0:
        raise DataError("cannot score an empty batch")
    preds = model.predict(X)
    flipped = model.predict(_flip_protected(X, protected_col))
    return float(np.mean(preds != flipped))


def counterfactual_consistency(model: RewardModel, X: np.ndarray, protected_col: int) -> float:
    """Mean absolute change in the calibrated positive-class probability
    under a protected-attribute flip."""
    if len(X) == 0:
        raise DataError("cannot score an empty batch")
    p = model.predict_proba(X)[:, 1]
    p_cf = model.predict_proba(_flip_protected(X, protected_col))[:, 1]
    return float(np.mean(np.abs(p - p_cf)))


def trust_score(
    drift: float,
    uncertainty: float,
    fairness: float,
    error: float,
    counterfactual: float,
    weights: TrustWeights,
) -> float:
    """T = 1 - weighted sum of the five components, clamped to [0, 1]."""
    components = {
        "drift": drift,
        "uncertainty": uncertainty,
        "fairness": fairness,
        "error": error,
        "counterfactual": counterfactual,
    }
    for name, value in components.items():
        if not 0.0 <= value <= 1.0:
            raise DataError(f"trust component {name}={value!r} outside [0, 1]")
    a, b, g, d, z = weights.as_tuple()
    penalty = a * drift + b * uncertainty + g * fairness + d * error + z * counterfactual
    return float(min(max(1.0 - penalty, 0.0), 1.0))


def ema_smooth(values: list[float] | np.ndarray, lam: float) -> list[float]:
    """Exponential moving average with T~_1 = T_1 and
    T~_i = lam*T_i + (1-lam)*T~_{i-1}."""
    if not 0.0 < lam <= 1.0:
        raise ConfigError(f"EMA coefficient must be in (0, 1], got {lam!r}")
    seq = [float(v) for v in values]
    if not seq:
        raise DataError("cannot smooth an empty sequence")
    if lam == 1.0:
        return seq
    out = [seq[0]]
    for v in seq[1:]:
        # Incremental form of lam*v + (1-lam)*prev; identical algebraically
        # and exact on constant sequences.
        out.append(out[-1] + lam * (v - out[-1]))
    return out


def feature_importance(
    model: RewardModel,
    X: np.ndarray,
    y: np.ndarray,
    groups: dict[str, np.ndarray],
    rng_seed: int,
    n_shuffles: int = 5,
) -> list[tuple[str, float]]:
    """Permutation importance per feature group, sorted descending.

    Importance is the mean accuracy drop over `n_shuffles` joint shuffles
    of the group's columns. This is the attribution proxy reported in
    place of exact Shapley values.
    """
    if len(X) == 0:
        raise DataError("evaluation set is empty")
    rng = np.random.default_rng(rng_seed)
    y = np.asarray(y)
    baseline = float(np.mean(model.predict(X) == y))
    scores: list[tuple[str, float]] = []
    for name, cols in groups.items():
        drops = []
        for _ in range(n_shuffles):
            perm = rng.permutation(len(X))
            shuffled = np.array(X, copy=True)
            shuffled[:, cols] = X[perm][:, cols]
            drops.append(baseline - float(np.mean(model.predict(shuffled) == y)))
        scores.append((name, float(np.mean(drops))))
    scores.sort(key=lambda kv: (-kv[1], kv[0]))
    return scores


@dataclass
class TrustTimeline:
    """Per-batch trust components plus the raw and smoothed trust series."""

    drift: list[float] = field(default_factory=list)
    uncertainty: list[float] = field(default_factory=list)
    fairness: list[float] = field(default_factory=list)
    error: list[float] = field(default_factory=list)
    counterfactual: list[float] = field(default_factory=list)
    trust: list[float] = field(default_factory=list)
    trust_smoothed: list[float] = field(default_factory=list)
    lam: float = 0.5

    def validate(self) -> None:
        lengths = {
            len(self.drift),
            len(self.uncertainty),
            len(self.fairness),
            len(self.error),
            len(self.counterfactual),
            len(self.trust),
            len(self.trust_smoothed),
        }
        if len(lengths) != 1:
            raise DataError("trust timeline series have inconsistent lengths")
        for series in (
            self.drift,
            self.uncertainty,
            self.fairness,
            self.error,
            self.counterfactual,
            self.trust,
            self.trust_smoothed,
        ):
            for v in series:
                if not 0.0 <= v <= 1.0:
                    raise DataError(f"timeline value {v!r} outside [0, 1]")

    def alerts(self, threshold: float) -> list[int]:
        """Batches whose smoothed trust falls below the threshold."""
        return [i for i, v in enumerate(self.trust_smoothed) if v < threshold]

    def to_csv(self) -> str:
        lines = ["batch,drift,uncertainty,fairness,error,counterfactual,trust,trust_smoothed"]
        for i in range(len(self.trust)):
            lines.append(
                f"{i},{self.drift[i]!r},{self.uncertainty[i]!r},{self.fairness[i]!r},"
                f"{self.error[i]!r},{self.counterfactual[i]!r},{self.trust[i]!r},"
                f"{self.trust_smoothed[i]!r}"
            )
        return "\n".join(lines) + "\n"
