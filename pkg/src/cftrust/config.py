"""Run configuration: a single YAML file, fully validated up front.

Every knob a run needs lives here; validation is total, so an invalid
configuration never reaches the pipeline. Unknown keys are rejected to
catch typos. Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .bias import InjectionPlan, load_lexicon
from .drift.autoencoder import AutoencoderConfig
from .drift.score import METRIC_NAMES
from .errors import ConfigError
from .ingest import REQUIRED_ROLES
from .reward import RewardModelConfig
from .trust import TrustWeights

TEMPLATE = """\
# cftrust run configuration (all values shown are the defaults)

seed: 7                  # global seed; stage RNG streams derive from it
out_dir: runs/demo       # where report.json, CSVs, and plots/ land

input:
  path: data/synth.csv   # CSV or JSON-lines, UTF-8
  schema:                # role -> column name; protected/id optional
    id: id
    title: title
    subject: subject
    source: source
    protected: protected # omit to synthesize a seeded Bernoulli(0.5) column
    date: date
    label: label
  k: 10                  # number of sequential batches
  clean_prefix: 5        # batches 0..clean_prefix-1 are never injected
  dump_cleaned: false    # also write cleaned records as JSON-lines

featurizer:
  text_dim: 256          # hashed bag-of-tokens width (>= 8)
  hash_seed: 9176        # documented token-hash seed

injection:
  enabled: true
  target_batches: [5, 6, 7, 8, 9]  # 0-based; must all be >= clean_prefix
  subject: politics      # subject to oversample (null disables)
  subject_factor: 2.0    # target proportion multiplier (>= 1)
  framing_rate: 0.5      # per-occurrence swap probability
  framing_lexicon: null  # path to a 2-column file; null = packaged default
  label_drift: 0.8       # target positive rate; scalar or {batch: rate}

reward_model:
  n_trees: 200
  depth: 4
  learning_rate: 0.1
  early_stop_patience: 20
  split: 0.8             # temporal train fraction of the clean prefix

autoencoder:             # plain denoising autoencoder
  bottleneck_dim: 32
  noise_sigma: 0.05
  dropout: 0.1
  epochs: 200
  step_size: 0.01
  batch_size: 32

attention_autoencoder:   # chunked self-attention variant
  bottleneck_dim: 32
  noise_sigma: 0.05
  dropout: 0.1
  epochs: 200
  step_size: 0.01
  batch_size: 32
  eta: 0.1               # variance penalty weight
  chunk_dim: 16          # feature-chunk size fed to attention

drift_weights:           # weights over the normalized drift metrics
  psi: 0.25
  jsd: 0.25
  ae_delta: 0.25
  tae_loss: 0.25

trust:
  alpha: 0.2             # drift weight
  beta: 0.2              # uncertainty weight
  gamma: 0.2             # fairness-violation weight
  delta: 0.2             # classification-error weight
  zeta: 0.2              # counterfactual-consistency weight
  lambda: 0.5            # EMA coefficient in (0, 1]
  alert_threshold: 0.7   # flag batches with smoothed trust below this
"""

_TOP_KEYS = {
    "seed",
    "out_dir",
    "input",
    "featurizer",
    "injection",
    "reward_model",
    "autoencoder",
    "attention_autoencoder",
    "drift_weights",
    "trust",
}
_INPUT_KEYS = {"path", "schema", "k", "clean_prefix", "dump_cleaned"}
_SCHEMA_KEYS = set(REQUIRED_ROLES) | {"id", "protected"}
_FEATURIZER_KEYS = {"text_dim", "hash_seed"}
_INJECTION_KEYS = {
    "enabled",
    "target_batches",
    "subject",
    "subject_factor",
    "framing_rate",
    "framing_lexicon",
    "label_drift",
}
_REWARD_KEYS = {"n_trees", "depth", "learning_rate", "early_stop_patience", "split"}
_AE_KEYS = {"bottleneck_dim", "noise_sigma", "dropout", "epochs", "step_size", "batch_size"}
_TAE_KEYS = _AE_KEYS | {"eta", "chunk_dim"}
_TRUST_KEYS = {"alpha", "beta", "gamma", "delta", "zeta", "lambda", "alert_threshold"}


@dataclass
class InputConfig:
    path: Path
    schema: dict[str, str]
    k: int = 10
    clean_prefix: int = 5
    dump_cleaned: bool = False


@dataclass
class FeaturizerConfig:
    text_dim: int = 256
    hash_seed: int = 9176


@dataclass
class InjectionConfig:
    enabled: bool = True
    plan: InjectionPlan = field(default_factory=InjectionPlan)
    lexicon_path: Path | None = None


@dataclass
class TrustConfig:
    weights: TrustWeights = field(default_factory=TrustWeights)
    lam: float = 0.5
    alert_threshold: float = 0.7


@dataclass
class RunConfig:
    seed: int
    out_dir: Path
    input: InputConfig
    featurizer: FeaturizerConfig
    injection: InjectionConfig
    reward: RewardModelConfig
    ae: AutoencoderConfig
    tae: AutoencoderConfig
    drift_weights: dict[str, float]
    trust: TrustConfig
    config_text: str = ""


def _require_mapping(node, name: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return node


def _check_keys(node: dict, allowed: set[str], name: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(
        path.read_text(encoding="utf-8"), base_dir=path.parent, seed_override=seed_override
    )


def parse_config(
    text: str,
    base_dir: str | Path = ".",
    seed_override: int | None = None,
    out_override: str | Path | None = None,
) -> RunConfig:
    """Parse and fully validate a YAML run configuration."""
    base = Path(base_dir)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    raw = _require_mapping(raw, "config")
    _check_keys(raw, _TOP_KEYS, "config")

    def resolve(p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    # --- input ---
    inp = _require_mapping(raw.get("input", {}), "input")
    _check_keys(inp, _INPUT_KEYS, "input")
    if "path" not in inp or "schema" not in inp:
        raise ConfigError("input.path and input.schema are required")
    schema = _require_mapping(inp["schema"], "input.schema")
    _check_keys(schema, _SCHEMA_KEYS, "input.schema")
    missing = [r for r in REQUIRED_ROLES if r not in schema]
    if missing:
        raise ConfigError(f"input.schema leaves required roles unmapped: {missing}")
    input_path = resolve(inp["path"])
    if not input_path.exists():
        raise ConfigError(f"input file {input_path} does not exist")
    k = int(inp.get("k", 10))
    clean_prefix = int(inp.get("clean_prefix", 5))
    if k < 2:
        raise ConfigError("input.k must be at least 2")
    if not 1 <= clean_prefix <= k:
        raise ConfigError("input.clean_prefix must be in [1, k]")
    input_cfg = InputConfig(
        path=input_path,
        schema={str(kk): str(v) for kk, v in schema.items()},
        k=k,
        clean_prefix=clean_prefix,
        dump_cleaned=bool(inp.get("dump_cleaned", False)),
    )

    # --- featurizer ---
    feat = _require_mapping(raw.get("featurizer", {}), "featurizer")
    _check_keys(feat, _FEATURIZER_KEYS, "featurizer")
    feat_cfg = FeaturizerConfig(
        text_dim=int(feat.get("text_dim", 256)),
        hash_seed=int(feat.get("hash_seed", 9176)),
    )
    if feat_cfg.text_dim < 8:
        raise ConfigError("featurizer.text_dim must be at least 8")

    # --- injection ---
    inj = _require_mapping(raw.get("injection", {}), "injection")
    _check_keys(inj, _INJECTION_KEYS, "injection")
    enabled = bool(inj.get("enabled", False))
    lexicon_path: Path | None = None
    lexicon: list[tuple[str, str]] = []
    if enabled:
        if inj.get("framing_lexicon") is not None:
            lexicon_path = resolve(inj["framing_lexicon"])
            if not lexicon_path.exists():
                raise ConfigError(f"framing lexicon {lexicon_path} does not exist")
            lexicon = load_lexicon(lexicon_path)
        else:
            from .synth import default_lexicon

            lexicon = default_lexicon()
    label_drift = inj.get("label_drift")
    if isinstance(label_drift, dict):
        label_drift = {int(kk): float(v) for kk, v in label_drift.items()}
    elif label_drift is not None:
        label_drift = float(label_drift)
    plan = InjectionPlan(
        target_batches=[int(t) for t in inj.get("target_batches", [])],
        subject=inj.get("subject"),
        subject_factor=float(inj.get("subject_factor", 1.0)),
        framing_lexicon=lexicon,
        framing_rate=float(inj.get("framing_rate", 0.0)),
        label_drift=label_drift,
    )
    if enabled:
        plan.validate(k, clean_prefix)
    injection_cfg = InjectionConfig(enabled=enabled, plan=plan, lexicon_path=lexicon_path)

    # --- reward model ---
    rew = _require_mapping(raw.get("reward_model", {}), "reward_model")
    _check_keys(rew, _REWARD_KEYS, "reward_model")
    reward_cfg = RewardModelConfig(
        n_trees=int(rew.get("n_trees", 200)),
        depth=int(rew.get("depth", 4)),
        learning_rate=float(rew.get("learning_rate", 0.1)),
        early_stop_patience=int(rew.get("early_stop_patience", 20)),
        split=float(rew.get("split", 0.8)),
    )
    reward_cfg.validate()

    # --- autoencoders ---
    def ae_config(section: str, allowed: set[str], variant: str) -> AutoencoderConfig:
        node = _require_mapping(raw.get(section, {}), section)
        _check_keys(node, allowed, section)
        cfg = AutoencoderConfig(
            variant=variant,
            bottleneck_dim=int(node.get("bottleneck_dim", 32)),
            noise_sigma=float(node.get("noise_sigma", 0.05)),
            dropout=float(node.get("dropout", 0.1)),
            epochs=int(node.get("epochs", 200)),
            step_size=float(node.get("step_size", 0.01)),
            batch_size=int(node.get("batch_size", 32)),
            eta=float(node.get("eta", 0.1)),
            chunk_dim=int(node.get("chunk_dim", 16)),
        )
        cfg.validate()
        return cfg

    ae_cfg = ae_config("autoencoder", _AE_KEYS, "plain")
    tae_cfg = ae_config("attention_autoencoder", _TAE_KEYS, "attention")

    # --- drift weights ---
    dw = _require_mapping(raw.get("drift_weights", {m: 0.25 for m in METRIC_NAMES}), "drift_weights")
    _check_keys(dw, set(METRIC_NAMES), "drift_weights")
    drift_weights = {m: float(dw.get(m, 0.0)) for m in METRIC_NAMES}
    if any(w < 0 for w in drift_weights.values()) or abs(sum(drift_weights.values()) - 1.0) > 1e-9:
        raise ConfigError("drift_weights must be nonnegative and sum to 1")

    # --- trust ---
    tr = _require_mapping(raw.get("trust", {}), "trust")
    _check_keys(tr, _TRUST_KEYS, "trust")
    weights = TrustWeights(
        alpha=float(tr.get("alpha", 0.2)),
        beta=float(tr.get("beta", 0.2)),
        gamma=float(tr.get("gamma", 0.2)),
        delta=float(tr.get("delta", 0.2)),
        zeta=float(tr.get("zeta", 0.2)),
    )
    lam = float(tr.get("lambda", 0.5))
    if not 0.0 < lam <= 1.0:
        raise ConfigError("trust.lambda must be in (0, 1]")
    alert = float(tr.get("alert_threshold", 0.7))
    if not 0.0 <= alert <= 1.0:
        raise ConfigError("trust.alert_threshold must be in [0, 1]")
    trust_cfg = TrustConfig(weights=weights, lam=lam, alert_threshold=alert)

    # --out overrides resolve against the caller's cwd, not the config dir.
    out_dir = Path(out_override) if out_override is not None else resolve(raw.get("out_dir", "runs/out"))
    seed = int(seed_override if seed_override is not None else raw.get("seed", 0))

    return RunConfig(
        seed=seed,
        out_dir=Path(out_dir),
        input=input_cfg,
        featurizer=feat_cfg,
        injection=injection_cfg,
        reward=reward_cfg,
        ae=ae_cfg,
        tae=tae_cfg,
        drift_weights=drift_weights,
        trust=trust_cfg,
        config_text=text,
    )
