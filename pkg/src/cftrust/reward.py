"""Baseline probabilistic reward classifier: gradient-boosted trees.

Plain gradient boosting on logistic loss with depth-limited regression
trees, Newton leaf values, and histogram split finding over quantile
bins. Training is completely deterministic (no sampling anywhere), so a
fixed dataset always yields bit-identical trees.

The positive-class probability is sigmoid(logit / temperature); the
temperature defaults to 1 and is fit post hoc on validation likelihood,
which can never change an argmax prediction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, SchemaMismatchError

MODEL_FORMAT_VERSION = 1
_EPS = 1e-12


@dataclass
class RewardModelConfig:
    n_trees: int = 200
    depth: int = 4
    learning_rate: float = 0.1
    early_stop_patience: int = 20
    split: float = 0.8
    reg_lambda: float = 1.0
    max_bins: int = 64

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.depth < 1:
            raise ConfigError("tree depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning rate must be in (0, 1]")
        if self.early_stop_patience < 1:
            raise ConfigError("early stop patience must be >= 1")
        if not 0.0 < self.split < 1.0:
            raise ConfigError("train fraction must be in (0, 1)")
        if self.max_bins < 2:
            raise ConfigError("max_bins must be >= 2")


@dataclass
class Tree:
    """Flat-array regression tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
        )


@dataclass
class RewardModel:
    trees: list[Tree]
    learning_rate: float
    n_features: int
    temperature: float = 1.0
    schema_hash: str = ""
    train_curve: list[float] = field(default_factory=list, repr=False)
    val_curve: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Raw additive logit, independent of the temperature."""
        X = self._check(X)
        logit = np.zeros(len(X))
        for tree in self.trees:
            logit += self.learning_rate * tree.predict(X)
        return logit

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (n, 2) as [P(label=0), P(label=1)]."""
        p = _sigmoid(self.decision_function(X) / self.temperature)
        return np.column_stack([1.0 - p, p])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DataError(
                f"feature dimension mismatch: model expects {self.n_features}, got {X.shape[1]}"
            )
        return X


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _EPS, 1.0 - _EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def temporal_split_index(n: int, split: float) -> int:
    """First `split` fraction (in the given temporal order) trains."""
    return max(1, min(n - 1, int(round(split * n))))


class _BinnedData:
    """Quantile-binned view of the training matrix for histogram splits."""

    def __init__(self, X: np.ndarray, max_bins: int):
        n, d = X.shape
        self.edges: list[np.ndarray] = []
        self.codes = np.zeros((n, d), dtype=np.int64)
        probs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
        for j in range(d):
            edges = np.unique(np.quantile(X[:, j], probs))
            # Drop edges at the column max: a split there sends nothing right.
            edges = edges[edges < X[:, j].max()] if edges.size else edges
            self.codes[:, j] = np.searchsorted(edges, X[:, j], side="left")
            self.edges.append(edges)
        self.n_bins = max((len(e) + 1 for e in self.edges), default=1)
        self.d = d
        # Mask of split positions that have a real threshold behind them.
        self.valid = np.zeros((d, self.n_bins - 1), dtype=bool)
        for j, e in enumerate(self.edges):
            self.valid[j, : len(e)] = True
        self.offsets = np.arange(d, dtype=np.int64) * self.n_bins


def _build_tree(
    binned: _BinnedData,
    g: np.ndarray,
    h: np.ndarray,
    max_depth: int,
    reg_lambda: float,
) -> tuple[Tree, np.ndarray]:
    """Fit one tree to gradients/hessians; returns it plus the per-sample
    leaf values for the training set (avoids a redundant predict pass)."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    update = np.zeros(len(g))
    nb = binned.n_bins

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def make_leaf(node: int, idx: np.ndarray) -> None:
        leaf = float(g[idx].sum() / (h[idx].sum() + reg_lambda))
        value[node] = leaf
        update[idx] = leaf

    stack = [(new_node(), np.arange(len(g)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 or nb < 2:
            make_leaf(node, idx)
            continue
        sub = binned.codes[idx]
        flat = (sub + binned.offsets).ravel()
        gsum = np.bincount(flat, weights=np.repeat(g[idx], binned.d), minlength=binned.d * nb)
        hsum = np.bincount(flat, weights=np.repeat(h[idx], binned.d), minlength=binned.d * nb)
        cnt = np.bincount(flat, minlength=binned.d * nb)
        gsum = gsum.reshape(binned.d, nb)
        hsum = hsum.reshape(binned.d, nb)
        cnt = cnt.reshape(binned.d, nb)
        G, H, N = float(g[idx].sum()), float(h[idx].sum()), len(idx)
        GL = gsum.cumsum(axis=1)[:, :-1]
        HL = hsum.cumsum(axis=1)[:, :-1]
        NL = cnt.cumsum(axis=1)[:, :-1]
        GR, HR, NR = G - GL, H - HL, N - NL
        gain = GL**2 / (HL + reg_lambda) + GR**2 / (HR + reg_lambda) - G**2 / (H + reg_lambda)
        gain[~binned.valid] = -np.inf
        gain[(NL == 0) | (NR == 0)] = -np.inf
        best = int(np.argmax(gain))
        j, b = divmod(best, nb - 1)
        if not np.isfinite(gain[j, b]) or gain[j, b] <= 1e-12:
            make_leaf(node, idx)
            continue
        feature[node] = j
        threshold[node] = float(binned.edges[j][b])
        left_mask = sub[:, j] <= b
        left[node] = new_node()
        right[node] = new_node()
        # Push right first so the left child is processed (and numbered) next.
        stack.append((right[node], idx[~left_mask], depth + 1))
        stack.append((left[node], idx[left_mask], depth + 1))

    tree = Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )
    return tree, update


def train(
    features: np.ndarray,
    labels: np.ndarray,
    config: RewardModelConfig | None = None,
    schema_hash: str = "",
) -> RewardModel:
    """Fit boosted trees on the temporally-first `split` fraction and early
    stop on the held-out remainder, returning the best validation round.

    `features` rows must already be in temporal order.
    """
    config = config or RewardModelConfig()
    config.validate()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("features and labels must align row-for-row")
    if len(y) < 20:
        raise DataError(f"need at least 20 samples to train, got {len(y)}")
    s = temporal_split_index(len(y), config.split)
    X_train, y_train = X[:s], y[:s]
    X_val, y_val = X[s:], y[s:]
    if len(np.unique(y_train)) < 2:
        raise DataError("training split contains a single class")

    binned = _BinnedData(X_train, config.max_bins)
    f_train = np.zeros(len(y_train))
    f_val = np.zeros(len(y_val))
    trees: list[Tree] = []
    train_curve: list[float] = []
    val_curve: list[float] = []
    best_round, best_val = -1, np.inf
    for m in range(config.n_trees):
        p = _sigmoid(f_train)
        tree, update = _build_tree(binned, y_train - p, p * (1.0 - p), config.depth, config.reg_lambda)
        trees.append(tree)
        f_train += config.learning_rate * update
        f_val += config.learning_rate * tree.predict(X_val)
        train_curve.append(log_loss(y_train, _sigmoid(f_train)))
        val_curve.append(log_loss(y_val, _sigmoid(f_val)))
        if val_curve[-1] < best_val - 1e-12:
            best_val, best_round = val_curve[-1], m
        if m - best_round >= config.early_stop_patience:
            break
    keep = best_round + 1 if best_round >= 0 else 1
    return RewardModel(
        trees=trees[:keep],
        learning_rate=config.learning_rate,
        n_features=X.shape[1],
        schema_hash=schema_hash,
        train_curve=train_curve,
        val_curve=val_curve,
    )


def fit_temperature(
    logits: np.ndarray,
    labels: np.ndarray,
    lo: float = 0.05,
    hi: float = 20.0,
    tol: float = 1e-4,
) -> float:
    """Golden-section minimizer of validation NLL over the temperature."""
    y = np.asarray(labels, dtype=np.float64)
    z = np.asarray(logits, dtype=np.float64)

    def nll(t: float) -> float:
        return log_loss(y, _sigmoid(z / t))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = nll(c), nll(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = nll(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = nll(d)
    return (a + b) / 2.0


def calibrate_temperature(
    model: RewardModel,
    val_features: np.ndarray,
    val_labels: np.ndarray,
) -> RewardModel:
    """Return a copy of the model with the NLL-minimizing temperature.

    Dividing the logit by a positive scalar preserves its sign, so every
    argmax prediction is unchanged by construction.
    """
    y = np.asarray(val_labels)
    if len(y) == 0:
        raise DataError("validation set is empty")
    if len(np.unique(y)) < 2:
        raise DataError("validation set contains a single class")
    t = fit_temperature(model.decision_function(val_features), y)
    return replace(model, temperature=float(t))


def uncertainty_margin(probs: np.ndarray) -> np.ndarray | float:
    """u = 1 - (p_max - p_second_max), elementwise over rows."""
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    top2 = -np.partition(-p, 1, axis=1)[:, :2]
    u = 1.0 - (top2[:, 0] - top2[:, 1])
    return float(u[0]) if single else u


def batch_uncertainty(model: RewardModel, X: np.ndarray) -> float:
    """Mean margin uncertainty over a batch."""
    if len(X) == 0:
        raise DataError("cannot score an empty batch")
    return float(np.mean(uncertainty_margin(model.predict_proba(X))))


def save_model(model: RewardModel, path: str | Path) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "learning_rate": model.learning_rate,
        "temperature": model.temperature,
        "n_features": model.n_features,
        "schema_hash": model.schema_hash,
        "trees": [t.to_dict() for t in model.trees],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, expected_schema_hash: str | None = None) -> RewardModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaMismatchError(
            f"unsupported model format version {payload.get('format_version')!r}"
        )
    if expected_schema_hash is not None and payload["schema_hash"] != expected_schema_hash:
        raise SchemaMismatchError(
            "model was trained against a different feature schema "
            f"({payload['schema_hash'][:12]}... != {expected_schema_hash[:12]}...)"
        )
    return RewardModel(
        trees=[Tree.from_dict(t) for t in payload["trees"]],
        learning_rate=payload["learning_rate"],
        n_features=payload["n_features"],
        temperature=payload["temperature"],
        schema_hash=payload["schema_hash"],
    )
