"""End-to-end pipeline: ingest, inject, featurize, train, score, report.

A run is a deterministic function of (config, input bytes): every stage
draws from its own seeded RNG stream derived from the global seed, so
changing one stage's work never perturbs another's randomness. Wall-clock
timings live in a sidecar file, never in report.json, which keeps report
bytes replayable.
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bias import AuditEvent, apply_plan
from .config import RunConfig
from .drift.autoencoder import train_autoencoder
from .drift.score import BatchDrift, DivergenceBaseline, DriftNormalizer, DriftReport, drift_score
from .errors import StageFailure
from .features import Featurizer
from .ingest import RecordSet, clean_normalize, dump_records, load_records, partition_batches
from .reward import batch_uncertainty, calibrate_temperature, temporal_split_index, train
from .trust import (
    TrustTimeline,
    counterfactual_consistency,
    ema_smooth,
    fairness_violation_rate,
    feature_importance,
    trust_score,
)

REPORT_FORMAT_VERSION = 1

CORRELATION_METRICS = (
    "psi",
    "jsd",
    "ae_delta",
    "uncertainty",
    "fairness",
    "counterfactual",
    "error",
    "trust",
)


def stage_seed(global_seed: int, stage: str) -> int:
    """Independent, platform-stable RNG seed for a named stage."""
    digest = hashlib.blake2b(f"{global_seed}:{stage}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class RunReport:
    """Everything a run produced, serializable to deterministic JSON."""

    seed: int
    config_echo: str
    dataset: dict
    batches: list[dict]
    model: dict
    autoencoders: dict
    feature_importances: list[list]
    audit_summary: dict
    alerts: list[int]
    alert_threshold: float
    ema_lambda: float
    trust_weights: dict
    drift_weights: dict
    versions: dict

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "seed": self.seed,
            "config_echo": self.config_echo,
            "dataset": self.dataset,
            "batches": self.batches,
            "model": self.model,
            "autoencoders": self.autoencoders,
            "feature_importances": self.feature_importances,
            "audit_summary": self.audit_summary,
            "alerts": self.alerts,
            "alert_threshold": self.alert_threshold,
            "ema_lambda": self.ema_lambda,
            "trust_weights": self.trust_weights,
            "drift_weights": self.drift_weights,
            "versions": self.versions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            seed=d["seed"],
            config_echo=d["config_echo"],
            dataset=d["dataset"],
            batches=d["batches"],
            model=d["model"],
            autoencoders=d["autoencoders"],
            feature_importances=d["feature_importances"],
            audit_summary=d["audit_summary"],
            alerts=d["alerts"],
            alert_threshold=d["alert_threshold"],
            ema_lambda=d["ema_lambda"],
            trust_weights=d["trust_weights"],
            drift_weights=d["drift_weights"],
            versions=d["versions"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class PipelineResult:
    report: RunReport
    audit_events: list[AuditEvent]
    timings: dict[str, float]
    cleaned: RecordSet | None = None


@contextmanager
def _stage(ctx: dict, name: str):
    start = time.perf_counter()
    try:
        yield
    except StageFailure:
        raise
    except Exception as exc:
        failure = StageFailure(name, exc)
        failure.partial = ctx
        raise failure from exc
    finally:
        ctx["timings"][name] = time.perf_counter() - start
        ctx["stages"].append(name)


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Execute every stage in order and assemble the run report.

    Raises StageFailure naming the stage that broke; the partial context
    (audit events, completed stages) rides along for quarantine dumps.
    """
    ctx: dict = {"timings": {}, "stages": [], "audit_events": []}
    seed = config.seed

    with _stage(ctx, "ingest"):
        with open(config.input.path, "r", encoding="utf-8") as fh:
            first_line = fh.readline()
        synthetic_input = first_line.startswith("# synthetic")
        records = load_records(
            config.input.path,
            config.input.schema,
            protected_seed=stage_seed(seed, "ingest"),
        )
        records = clean_normalize(records)
        series = partition_batches(records, config.input.k, config.input.clean_prefix)

    with _stage(ctx, "injection"):
        if config.injection.enabled:
            rng = np.random.default_rng(stage_seed(seed, "injection"))
            batches, events = apply_plan(series, config.injection.plan, rng)
        else:
            batches, events = list(series.batches), []
        ctx["audit_events"] = events
        injected = set(config.injection.plan.target_batches) if config.injection.enabled else set()

    with _stage(ctx, "featurize"):
        featurizer = Featurizer(
            text_dim=config.featurizer.text_dim, hash_seed=config.featurizer.hash_seed
        ).fit(series.clean_records)
        schema = featurizer.schema
        X_batches = [featurizer.transform(b) for b in batches]
        y_batches = [featurizer.labels(b) for b in batches]

    with _stage(ctx, "reward_model"):
        X_prefix = np.vstack(X_batches[: config.input.clean_prefix])
        y_prefix = np.concatenate(y_batches[: config.input.clean_prefix])
        model = train(X_prefix, y_prefix, config.reward, schema_hash=schema.hash_digest())

    with _stage(ctx, "calibration"):
        s = temporal_split_index(len(y_prefix), config.reward.split)
        X_val, y_val = X_prefix[s:], y_prefix[s:]
        model = calibrate_temperature(model, X_val, y_val)

    with _stage(ctx, "autoencoder"):
        drift_cols = schema.drift_columns
        prefix = config.input.clean_prefix
        # Reference data and evaluated rows never overlap: detectors fit on
        # even-position rows of each clean batch; those batches are scored on
        # their odd-position rows and later batches on all rows. Otherwise
        # every clean-prefix batch carries an in-sample advantage that the
        # min-max normalizer amplifies into phantom drift on later batches.
        reference_rows = np.vstack([X[0::2, :][:, drift_cols] for X in X_batches[:prefix]])
        reference_labels = np.concatenate([y[0::2] for y in y_batches[:prefix]])
        holdout_rows = np.vstack([X[1::2, :][:, drift_cols] for X in X_batches[:prefix]])
        ae = train_autoencoder(reference_rows, config.ae, stage_seed(seed, "autoencoder"))
        ae_reference = ae.mean_reconstruction_error(holdout_rows)
        tae = train_autoencoder(reference_rows, config.tae, stage_seed(seed, "attention_ae"))

    with _stage(ctx, "metrics"):
        baseline = DivergenceBaseline.fit(reference_rows, reference_labels)
        raw_rows: list[dict] = []
        for t, (X, y) in enumerate(zip(X_batches, y_batches)):
            if t < prefix:
                Xd, yd = X[1::2, :][:, drift_cols], y[1::2]
            else:
                Xd, yd = X[:, drift_cols], y
            psi_t, jsd_t = baseline.compare(Xd, yd)
            accuracy = float(np.mean(model.predict(X) == y))
            raw_rows.append(
                {
                    "psi": psi_t,
                    "jsd": jsd_t,
                    "ae_delta": ae.mean_reconstruction_error(Xd) - ae_reference,
                    "tae_loss": tae.batch_loss(Xd),
                    "accuracy": accuracy,
                    "error": 1.0 - accuracy,
                    "uncertainty": batch_uncertainty(model, X),
                    "fairness": fairness_violation_rate(model, X, schema.protected_column),
                    "counterfactual": counterfactual_consistency(model, X, schema.protected_column),
                }
            )

    with _stage(ctx, "trust"):
        normalizer = DriftNormalizer.from_clean_prefix(raw_rows[: config.input.clean_prefix])
        # Scoring happens only after the max has run over every batch, so
        # early batches are not judged against a max they alone define.
        for row in raw_rows:
            normalizer.observe(row)
        timeline = TrustTimeline(lam=config.trust.lam)
        drift_rows: list[BatchDrift] = []
        for t, row in enumerate(raw_rows):
            d_t = drift_score(
                row["psi"],
                row["jsd"],
                row["ae_delta"],
                row["tae_loss"],
                normalizer,
                config.drift_weights,
            )
            drift_rows.append(
                BatchDrift(
                    batch=t,
                    psi=row["psi"],
                    jsd=row["jsd"],
                    ae_delta=row["ae_delta"],
                    tae_loss=row["tae_loss"],
                    drift=d_t,
                )
            )
            timeline.drift.append(d_t)
            timeline.uncertainty.append(row["uncertainty"])
            timeline.fairness.append(row["fairness"])
            timeline.error.append(row["error"])
            timeline.counterfactual.append(row["counterfactual"])
            timeline.trust.append(
                trust_score(
                    d_t,
                    row["uncertainty"],
                    row["fairness"],
                    row["error"],
                    row["counterfactual"],
                    config.trust.weights,
                )
            )
        timeline.trust_smoothed = ema_smooth(timeline.trust, config.trust.lam)
        timeline.validate()
        DriftReport(rows=drift_rows).validate()

    with _stage(ctx, "attribution"):
        importances = feature_importance(
            model, X_val, y_val, schema.groups, stage_seed(seed, "attribution")
        )

    batches_out = []
    for t, row in enumerate(raw_rows):
        batches_out.append(
            {
                "index": t,
                "size": len(batches[t]),
                "injected": t in injected,
                "accuracy": float(row["accuracy"]),
                "error": float(row["error"]),
                "psi": float(row["psi"]),
                "jsd": float(row["jsd"]),
                "ae_delta": float(row["ae_delta"]),
                "tae_loss": float(row["tae_loss"]),
                "drift": float(timeline.drift[t]),
                "uncertainty": float(row["uncertainty"]),
                "fairness_violation": float(row["fairness"]),
                "counterfactual": float(row["counterfactual"]),
                "trust": float(timeline.trust[t]),
                "trust_smoothed": float(timeline.trust_smoothed[t]),
            }
        )

    audit_summary: dict[str, int] = {}
    for ev in ctx["audit_events"]:
        audit_summary[ev.kind] = audit_summary.get(ev.kind, 0) + 1
    audit_summary["total"] = len(ctx["audit_events"])

    report = RunReport(
        seed=seed,
        config_echo=config.config_text,
        dataset={
            "input_path": str(config.input.path),
            "rows_loaded": len(records),
            "rows_dropped": records.dropped,
            "k": config.input.k,
            "clean_prefix": config.input.clean_prefix,
            "synthetic_input": synthetic_input,
        },
        batches=batches_out,
        model={
            "n_trees": len(model.trees),
            "temperature": float(model.temperature),
            "boosting_rounds_run": len(model.train_curve),
            "schema_hash": model.schema_hash,
        },
        autoencoders={
            "plain": {
                "final_epoch_loss": float(ae.epoch_losses[-1]),
                "reference_error": float(ae_reference),
            },
            "attention": {"final_epoch_loss": float(tae.epoch_losses[-1])},
        },
        feature_importances=[[name, float(v)] for name, v in importances],
        audit_summary=audit_summary,
        alerts=timeline.alerts(config.trust.alert_threshold),
        alert_threshold=config.trust.alert_threshold,
        ema_lambda=config.trust.lam,
        trust_weights={
            "alpha": config.trust.weights.alpha,
            "beta": config.trust.weights.beta,
            "gamma": config.trust.weights.gamma,
            "delta": config.trust.weights.delta,
            "zeta": config.trust.weights.zeta,
        },
        drift_weights=dict(config.drift_weights),
        versions={
            "cftrust": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    )
    return PipelineResult(
        report=report,
        audit_events=ctx["audit_events"],
        timings=ctx["timings"],
        cleaned=records if config.input.dump_cleaned else None,
    )


def emit_plots(report: RunReport, plots_dir: str | Path) -> list[str]:
    """Write the four plot-ready CSVs from a finished report."""
    plots_dir = Path(plots_dir)
    plots_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def write(name: str, text: str) -> None:
        p = plots_dir / name
        p.write_text(text, encoding="utf-8")
        written.append(str(p))

    rows = report.batches
    lines = ["batch,drift,error"]
    lines += [f"{r['index']},{r['drift']!r},{r['error']!r}" for r in rows]
    write("drift_vs_error.csv", "\n".join(lines) + "\n")

    lines = ["batch,trust,trust_smoothed"]
    lines += [f"{r['index']},{r['trust']!r},{r['trust_smoothed']!r}" for r in rows]
    write("trust_timeline.csv", "\n".join(lines) + "\n")

    lines = ["group,importance"]
    lines += [f"{name},{value!r}" for name, value in report.feature_importances]
    write("feature_importance.csv", "\n".join(lines) + "\n")

    name_map = {"fairness": "fairness_violation"}
    data = np.array(
        [[r[name_map.get(m, m)] for r in rows] for m in CORRELATION_METRICS], dtype=np.float64
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(data)
    corr = np.nan_to_num(corr, nan=0.0)
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0
    lines = ["metric," + ",".join(CORRELATION_METRICS)]
    for i, m in enumerate(CORRELATION_METRICS):
        lines.append(m + "," + ",".join(repr(float(v)) for v in corr[i]))
    write("metric_correlation.csv", "\n".join(lines) + "\n")
    return written


def write_outputs(result: PipelineResult, out_dir: str | Path) -> dict[str, str]:
    """Serialize a successful run; returns the map of artifact paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = result.report
    paths: dict[str, str] = {}

    report_path = out_dir / "report.json"
    report_path.write_text(report.to_json(), encoding="utf-8")
    paths["report"] = str(report_path)

    tl_lines = ["batch,drift,uncertainty,fairness,error,counterfactual,trust,trust_smoothed"]
    for r in report.batches:
        tl_lines.append(
            f"{r['index']},{r['drift']!r},{r['uncertainty']!r},{r['fairness_violation']!r},"
            f"{r['error']!r},{r['counterfactual']!r},{r['trust']!r},{r['trust_smoothed']!r}"
        )
    (out_dir / "trust_timeline.csv").write_text("\n".join(tl_lines) + "\n", encoding="utf-8")
    paths["trust_timeline"] = str(out_dir / "trust_timeline.csv")

    dr_lines = ["batch,psi,jsd,ae_delta,tae_loss,drift"]
    for r in report.batches:
        dr_lines.append(
            f"{r['index']},{r['psi']!r},{r['jsd']!r},{r['ae_delta']!r},"
            f"{r['tae_loss']!r},{r['drift']!r}"
        )
    (out_dir / "drift_report.csv").write_text("\n".join(dr_lines) + "\n", encoding="utf-8")
    paths["drift_report"] = str(out_dir / "drift_report.csv")

    with open(out_dir / "audit.jsonl", "w", encoding="utf-8") as fh:
        for ev in result.audit_events:
            fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
    paths["audit"] = str(out_dir / "audit.jsonl")

    if result.cleaned is not None:
        dump_records(result.cleaned, out_dir / "cleaned_records.jsonl")
        paths["cleaned_records"] = str(out_dir / "cleaned_records.jsonl")

    paths["plots"] = str(out_dir / "plots")
    emit_plots(report, out_dir / "plots")

    sidecar = {
        "written_at": datetime.now(timezone.utc).isoformat(),
        "stage_timings_seconds": {k: round(v, 6) for k, v in result.timings.items()},
    }
    (out_dir / "report_meta.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    paths["meta"] = str(out_dir / "report_meta.json")
    return paths


def quarantine_failure(config: RunConfig, failure: StageFailure) -> str:
    """Write partial outputs of a failed run to a fresh quarantine dir."""
    base = config.out_dir / "quarantine"
    base.mkdir(parents=True, exist_ok=True)
    n = 1
    while (base / f"run-{n:04d}").exists():
        n += 1
    qdir = base / f"run-{n:04d}"
    qdir.mkdir()
    cause = failure.cause
    (qdir / "error.json").write_text(
        json.dumps(
            {
                "stage": failure.stage,
                "error_type": type(cause).__name__,
                "message": str(cause),
                "completed_stages": getattr(failure, "partial", {}).get("stages", []),
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    (qdir / "config_echo.yaml").write_text(config.config_text, encoding="utf-8")
    events = getattr(failure, "partial", {}).get("audit_events", [])
    if events:
        with open(qdir / "audit.jsonl", "w", encoding="utf-8") as fh:
            for ev in events:
                fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
    return str(qdir)


def execute_run(config: RunConfig) -> tuple[PipelineResult, dict[str, str]]:
    """Run the pipeline and write outputs, quarantining on failure."""
    try:
        result = run_pipeline(config)
    except StageFailure as failure:
        qdir = quarantine_failure(config, failure)
        failure.quarantine_dir = qdir
        raise
    paths = write_outputs(result, config.out_dir)
    return result, paths
