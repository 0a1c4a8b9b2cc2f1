"""End-to-end pipeline behavior: reports, outputs, determinism, quarantine."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from cftrust.config import parse_config
from cftrust.errors import StageFailure
from cftrust.pipeline import RunReport, emit_plots, execute_run, run_pipeline
from tests.conftest import fast_config_text

INJECTION = """enabled: true
  target_batches: [3, 4, 5]
  subject: health
  subject_factor: 2.0
  framing_rate: 0.5
  label_drift: 0.8"""


@pytest.fixture(scope="module")
def injected_run(synth_small, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = parse_config(fast_config_text(synth_small, out, injection=INJECTION))
    result, paths = execute_run(config)
    return config, result, paths


class TestRunReport:
    def test_every_batch_index_appears_exactly_once(self, injected_run):
        _, result, _ = injected_run
        indices = [b["index"] for b in result.report.batches]
        assert indices == list(range(6))

    def test_all_components_within_unit_interval(self, injected_run):
        _, result, _ = injected_run
        for b in result.report.batches:
            for key in ("drift", "uncertainty", "fairness_violation", "counterfactual",
                        "trust", "trust_smoothed", "error", "accuracy"):
                assert 0.0 <= b[key] <= 1.0, (key, b)
            assert b["psi"] >= 0.0
            assert 0.0 <= b["jsd"] <= math.log(2.0) + 1e-9

    def test_config_echo_is_byte_identical(self, injected_run):
        config, result, _ = injected_run
        assert result.report.config_echo == config.config_text

    def test_injected_flags_match_plan(self, injected_run):
        _, result, _ = injected_run
        assert [b["injected"] for b in result.report.batches] == [False] * 3 + [True] * 3

    def test_generator_datasets_flagged_as_synthetic(self, injected_run):
        _, result, _ = injected_run
        assert result.report.dataset["synthetic_input"] is True

    def test_audit_events_recorded_for_each_kind(self, injected_run):
        _, result, _ = injected_run
        summary = result.report.audit_summary
        for kind in ("subject_skew", "framing", "label_drift"):
            assert summary.get(kind, 0) > 0
        assert summary["total"] == len(result.audit_events)

    def test_feature_importances_sorted_descending(self, injected_run):
        _, result, _ = injected_run
        values = [v for _, v in result.report.feature_importances]
        assert values == sorted(values, reverse=True)
        names = {name for name, _ in result.report.feature_importances}
        assert names == {"text", "subject", "source", "protected", "date"}


class TestOutputs:
    def test_expected_files_exist(self, injected_run):
        config, _, paths = injected_run
        out = Path(config.out_dir)
        for name in ("report.json", "trust_timeline.csv", "drift_report.csv",
                     "audit.jsonl", "report_meta.json"):
            assert (out / name).exists(), name
        for name in ("drift_vs_error.csv", "trust_timeline.csv",
                     "feature_importance.csv", "metric_correlation.csv"):
            assert (out / "plots" / name).exists(), name

    def test_plot_row_counts_match_batches(self, injected_run):
        config, _, _ = injected_run
        out = Path(config.out_dir)
        for name in ("drift_vs_error.csv", "trust_timeline.csv"):
            lines = (out / "plots" / name).read_text().strip().splitlines()
            assert len(lines) == 1 + 6

    def test_correlation_matrix_symmetric_with_unit_diagonal(self, injected_run):
        config, _, _ = injected_run
        lines = (Path(config.out_dir) / "plots" / "metric_correlation.csv").read_text().strip().splitlines()
        header = lines[0].split(",")[1:]
        rows = [ln.split(",") for ln in lines[1:]]
        M = np.array([[float(v) for v in r[1:]] for r in rows])
        assert [r[0] for r in rows] == header
        assert np.array_equal(M, M.T)
        assert np.array_equal(np.diag(M), np.ones(len(header)))

    def test_audit_jsonl_is_valid_and_nonempty(self, injected_run):
        config, result, _ = injected_run
        lines = (Path(config.out_dir) / "audit.jsonl").read_text().strip().splitlines()
        assert len(lines) == len(result.audit_events)
        first = json.loads(lines[0])
        assert {"kind", "batch", "record_id", "field", "before", "after"} <= set(first)

    def test_timings_live_in_sidecar_not_report(self, injected_run):
        config, _, _ = injected_run
        report = json.loads((Path(config.out_dir) / "report.json").read_text())
        meta = json.loads((Path(config.out_dir) / "report_meta.json").read_text())
        assert "stage_timings_seconds" in meta
        assert "timings" not in report and "written_at" not in report

    def test_report_round_trips_through_load(self, injected_run):
        config, result, _ = injected_run
        loaded = RunReport.load(Path(config.out_dir) / "report.json")
        assert loaded.to_json() == result.report.to_json()

    def test_emit_plots_from_loaded_report(self, injected_run, tmp_path):
        config, _, _ = injected_run
        loaded = RunReport.load(Path(config.out_dir) / "report.json")
        written = emit_plots(loaded, tmp_path / "plots2")
        assert len(written) == 4
        original = (Path(config.out_dir) / "plots" / "drift_vs_error.csv").read_bytes()
        assert (tmp_path / "plots2" / "drift_vs_error.csv").read_bytes() == original


class TestDeterminism:
    def test_identical_config_gives_byte_identical_report(self, synth_small, tmp_path):
        # Same config text, two output directories (an out override never
        # touches the echoed config): the reports must match byte for byte.
        text = fast_config_text(synth_small, tmp_path / "a", injection=INJECTION)
        execute_run(parse_config(text))
        execute_run(parse_config(text, out_override=tmp_path / "b"))
        a = (tmp_path / "a" / "report.json").read_bytes()
        b = (tmp_path / "b" / "report.json").read_bytes()
        assert a == b

    def test_seed_changes_the_injection_outcome(self, synth_small, tmp_path):
        text = fast_config_text(synth_small, tmp_path / "x", injection=INJECTION)
        r1 = run_pipeline(parse_config(text, seed_override=1))
        r2 = run_pipeline(parse_config(text, seed_override=2))
        a1 = [(e.record_id, e.field) for e in r1.audit_events]
        a2 = [(e.record_id, e.field) for e in r2.audit_events]
        assert a1 != a2


class TestQuarantine:
    def test_stage_failure_quarantines_partial_outputs(self, synth_small, tmp_path):
        bad = """enabled: true
  target_batches: [3]
  subject: no-such-subject
  subject_factor: 2.0"""
        config = parse_config(fast_config_text(synth_small, tmp_path / "q", injection=bad))
        with pytest.raises(StageFailure) as exc_info:
            execute_run(config)
        assert exc_info.value.stage == "injection"
        qdir = Path(exc_info.value.quarantine_dir)
        assert qdir.exists()
        error = json.loads((qdir / "error.json").read_text())
        assert error["stage"] == "injection"
        assert "no-such-subject" in error["message"]
        assert (qdir / "config_echo.yaml").read_text() == config.config_text
        assert not (tmp_path / "q" / "report.json").exists()

    def test_second_failure_gets_a_fresh_directory(self, synth_small, tmp_path):
        bad = """enabled: true
  target_batches: [3]
  subject: no-such-subject
  subject_factor: 2.0"""
        config = parse_config(fast_config_text(synth_small, tmp_path / "q2", injection=bad))
        for _ in range(2):
            with pytest.raises(StageFailure):
                execute_run(config)
        base = tmp_path / "q2" / "quarantine"
        assert (base / "run-0001").exists() and (base / "run-0002").exists()


class TestCleanControl:
    def test_clean_dataset_keeps_trust_level_across_batches(self, synth_5k, tmp_path):
        # No injection: i.i.d. batches must keep smoothed trust within 0.1,
        # checked over five pipeline seeds.
        for seed in (1, 2, 3, 4, 5):
            text = f"""
seed: {seed}
out_dir: {tmp_path / "clean"}
input:
  path: {synth_5k}
  schema: {{id: id, title: title, subject: subject, source: source, protected: protected, date: date, label: label}}
  k: 10
  clean_prefix: 5
featurizer: {{text_dim: 64}}
injection: {{enabled: false}}
reward_model: {{n_trees: 200, early_stop_patience: 20}}
autoencoder: {{epochs: 150, bottleneck_dim: 32}}
attention_autoencoder: {{epochs: 150, bottleneck_dim: 32}}
"""
            result = run_pipeline(parse_config(text))
            smoothed = [b["trust_smoothed"] for b in result.report.batches]
            assert max(smoothed) - min(smoothed) <= 0.1, (seed, smoothed)


def test_dump_cleaned_records(synth_small, tmp_path):
    text = fast_config_text(synth_small, tmp_path / "dump").replace(
        "clean_prefix: 3", "clean_prefix: 3\n  dump_cleaned: true"
    )
    config = parse_config(text)
    _, paths = execute_run(config)
    dump = Path(paths["cleaned_records"])
    lines = dump.read_text().strip().splitlines()
    assert len(lines) == 600
    row = json.loads(lines[0])
    assert {"id", "title", "subject", "source", "protected", "date", "label"} == set(row)
