"""Shared fixtures: synthetic dataset files and a parsed record series."""

from pathlib import Path

import pytest

from cftrust.ingest import clean_normalize, load_records, partition_batches
from cftrust.synth import generate_synthetic

SYNTH_SCHEMA = {
    "id": "id",
    "title": "title",
    "subject": "subject",
    "source": "source",
    "protected": "protected",
    "date": "date",
    "label": "label",
}


@pytest.fixture(scope="session")
def synth_5k(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synth5k.csv"
    generate_synthetic(path, n=5000, k=10, seed=7)
    return path


@pytest.fixture(scope="session")
def synth_small(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synth_small.csv"
    generate_synthetic(path, n=600, k=6, seed=3)
    return path


@pytest.fixture(scope="session")
def small_series(synth_small):
    records = clean_normalize(load_records(synth_small, SYNTH_SCHEMA))
    return partition_batches(records, k=6, clean_prefix=3)


def fast_config_text(
    input_path,
    out_dir,
    seed=3,
    injection="enabled: false",
    k=6,
    clean_prefix=3,
    text_dim=16,
):
    """Config with small models so pipeline tests stay quick."""
    return f"""
seed: {seed}
out_dir: {out_dir}
input:
  path: {input_path}
  schema: {{id: id, title: title, subject: subject, source: source, protected: protected, date: date, label: label}}
  k: {k}
  clean_prefix: {clean_prefix}
featurizer: {{text_dim: {text_dim}}}
injection:
  {injection}
reward_model: {{n_trees: 30, early_stop_patience: 5}}
autoencoder: {{epochs: 25, bottleneck_dim: 8}}
attention_autoencoder: {{epochs: 25, bottleneck_dim: 8, chunk_dim: 8}}
"""
