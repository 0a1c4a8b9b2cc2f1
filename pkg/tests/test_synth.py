"""Synthetic generator: balance, determinism, loader round-trip."""

import pytest

from cftrust.errors import ConfigError
from cftrust.ingest import load_records
from cftrust.synth import default_lexicon, generate_synthetic
from tests.conftest import SYNTH_SCHEMA


def test_5000_rows_balanced_within_two_percent(synth_5k):
    rs = load_records(synth_5k, SYNTH_SCHEMA)
    assert len(rs) == 5000
    assert rs.dropped == 0
    rate = sum(r.label for r in rs) / len(rs)
    assert abs(rate - 0.5) <= 0.02


def test_identical_seeds_give_identical_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    generate_synthetic(a, n=300, k=10, seed=42)
    generate_synthetic(b, n=300, k=10, seed=42)
    assert a.read_bytes() == b.read_bytes()


def test_different_seeds_differ(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    generate_synthetic(a, n=300, k=10, seed=1)
    generate_synthetic(b, n=300, k=10, seed=2)
    assert a.read_bytes() != b.read_bytes()


def test_too_few_rows_for_batch_count_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match="20"):
        generate_synthetic(tmp_path / "x.csv", n=10, k=10, seed=0)


def test_header_documents_the_process(synth_5k):
    head = synth_5k.read_text(encoding="utf-8").splitlines()[:5]
    assert head[0].startswith("#")
    assert any("seed=7" in ln for ln in head)


def test_default_lexicon_has_forty_distinct_pairs():
    lex = default_lexicon()
    assert len(lex) == 40
    terms = [a for a, _ in lex]
    assert len(set(terms)) == 40
    assert all(a != b for a, b in lex)


def test_titles_use_lexicon_terms(synth_5k):
    # Framing injection needs swappable terms present in most titles.
    rs = load_records(synth_5k, SYNTH_SCHEMA)
    vocab = {t for pair in default_lexicon() for t in pair}
    hits = sum(1 for r in rs if vocab & set(r.title.split()))
    assert hits / len(rs) > 0.95
