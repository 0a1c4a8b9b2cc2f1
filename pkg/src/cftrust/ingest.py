"""Dataset ingestion: load, clean, and partition news-style records.

Input is CSV or JSON-lines with a schema mapping that names the columns
holding each required role (title, subject, source, date, label). Rows
missing a title, an unknown label token, or an unparseable date are
excluded and counted, never stored. An optional `protected` role may be
mapped; when absent, a seeded Bernoulli(0.5) column is synthesized so the
counterfactual machinery always has a flip target.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, replace
from datetime import date as Date
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataError

REQUIRED_ROLES = ("title", "subject", "source", "date", "label")

# Label tokens accepted in input files; everything else drops the row.
_LABEL_TOKENS = {"fake": 0, "true": 1, "0": 0, "1": 1}

_PUNCT_RE = re.compile(r"[^\w\s]|_")
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Record:
    """One news item after parsing."""

    id: str
    title: str
    subject: str
    source: str
    protected: int
    date: Date
    label: int


@dataclass
class RecordSet:
    """Parsed records plus a count of rows excluded during loading/cleaning."""

    records: list[Record]
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class BatchSeries:
    """Ordered partition of a record set into k sequential batches.

    Batches before `clean_prefix` are guaranteed never to receive
    synthetic bias injection.
    """

    batches: list[list[Record]]
    k: int
    clean_prefix: int

    def __post_init__(self):
        if self.k != len(self.batches):
            raise ValueError("k must equal the number of batches")
        if self.k < 2:
            raise ValueError("a batch series needs at least 2 batches")
        if not 1 <= self.clean_prefix <= self.k:
            raise ValueError("clean_prefix must be in [1, k]")

    @property
    def clean_records(self) -> list[Record]:
        out: list[Record] = []
        for batch in self.batches[: self.clean_prefix]:
            out.extend(batch)
        return out


def _parse_date(token: str) -> Date | None:
    token = token.strip()
    if not token:
        return None
    try:
        return datetime.strptime(token, "%Y-%m-%d").date()
    except ValueError:
        return None


def _iter_raw_rows(path: Path) -> list[dict]:
    """Read CSV or JSON-lines rows as dicts. Lines starting with '#' are
    comments (the synthetic generator documents itself that way)."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read input file {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"input file {path} has zero data rows")
    if path.suffix.lower() in (".jsonl", ".ndjson") or lines[0].lstrip().startswith("{"):
        rows = []
        for i, ln in enumerate(lines):
            try:
                rows.append(json.loads(ln))
            except json.JSONDecodeError as exc:
                raise DataError(f"bad JSON on line {i + 1} of {path}: {exc}") from exc
        return rows
    reader = csv.DictReader(lines)
    return list(reader)


def load_records(
    path: str | Path,
    schema: dict[str, str],
    protected_seed: int = 0,
) -> RecordSet:
    """Load and parse rows from `path` using a role -> column-name mapping.

    Rows with an empty title, a label token outside {fake, true, 0, 1}, an
    unparseable date, or (when mapped) a non-binary protected value are
    excluded and counted. Raises DataError when no rows survive.

    When the schema maps no `protected` column, a Bernoulli(0.5) column is
    drawn from `protected_seed` in row order, so identical files and seeds
    give identical records.
    """
    path = Path(path)
    missing = [role for role in REQUIRED_ROLES if role not in schema]
    if missing:
        raise DataError(f"schema leaves required roles unmapped: {missing}")

    raw = _iter_raw_rows(path)
    has_protected = "protected" in schema
    rng = np.random.default_rng(protected_seed)
    # Draw the full column up front so drops do not shift later rows.
    synth_protected = rng.integers(0, 2, size=len(raw))

    id_col = schema.get("id")
    records: list[Record] = []
    dropped = 0
    for i, row in enumerate(raw):
        title = str(row.get(schema["title"]) or "").strip()
        label_token = str(row.get(schema["label"]) if row.get(schema["label"]) is not None else "").strip().lower()
        parsed_date = _parse_date(str(row.get(schema["date"]) or ""))
        if not title or label_token not in _LABEL_TOKENS or parsed_date is None:
            dropped += 1
            continue
        if has_protected:
            prot_token = str(row.get(schema["protected"]) if row.get(schema["protected"]) is not None else "").strip()
            if prot_token not in ("0", "1"):
                dropped += 1
                continue
            protected = int(prot_token)
        else:
            protected = int(synth_protected[i])
        rec_id = str(row.get(id_col)) if id_col and row.get(id_col) is not None else f"row{i:06d}"
        records.append(
            Record(
                id=rec_id,
                title=title,
                subject=str(row.get(schema["subject"]) or "").strip(),
                source=str(row.get(schema["source"]) or "").strip(),
                protected=protected,
                date=parsed_date,
                label=_LABEL_TOKENS[label_token],
            )
        )
    if not records:
        raise DataError(f"zero surviving rows in {path} ({dropped} dropped)")
    return RecordSet(records=records, dropped=dropped)


def clean_title(title: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace."""
    t = _PUNCT_RE.sub(" ", title.lower())
    return _WS_RE.sub(" ", t).strip()


def clean_normalize(records: RecordSet) -> RecordSet:
    """Normalize titles and clip extreme dates.

    Titles are lowercased, punctuation-stripped, and whitespace-collapsed;
    records whose title becomes empty are dropped and counted. Dates
    outside the [1%, 99%] quantiles of the date distribution are clipped
    to the nearest-rank quantile dates (actual order statistics), which
    makes the whole transformation idempotent.
    """
    cleaned: list[Record] = []
    dropped = records.dropped
    for rec in records:
        title = clean_title(rec.title)
        if not title:
            dropped += 1
            continue
        cleaned.append(replace(rec, title=title))
    if not cleaned:
        raise DataError("zero surviving rows after cleaning")

    ordinals = np.array([r.date.toordinal() for r in cleaned], dtype=np.int64)
    lo = int(np.quantile(ordinals, 0.01, method="nearest"))
    hi = int(np.quantile(ordinals, 0.99, method="nearest"))
    clipped = [
        replace(r, date=Date.fromordinal(min(max(r.date.toordinal(), lo), hi)))
        for r in cleaned
    ]
    return RecordSet(records=clipped, dropped=dropped)


def partition_batches(records: RecordSet, k: int, clean_prefix: int = 1) -> BatchSeries:
    """Sort by (date, id) and split into k contiguous batches.

    Sizes differ by at most one; when n is not divisible by k the larger
    batches come last. Ties in dates break by id for determinism.
    """
    n = len(records)
    if k < 2:
        raise DataError("k must be at least 2")
    if k > n:
        raise DataError(f"cannot split {n} records into {k} batches")
    ordered = sorted(records.records, key=lambda r: (r.date, r.id))
    q, r = divmod(n, k)
    sizes = [q] * (k - r) + [q + 1] * r
    batches: list[list[Record]] = []
    pos = 0
    for size in sizes:
        batches.append(ordered[pos : pos + size])
        pos += size
    return BatchSeries(batches=batches, k=k, clean_prefix=clean_prefix)


def dump_records(records: RecordSet, path: str | Path) -> None:
    """Debug dump of cleaned records as JSON-lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "id": rec.id,
                        "title": rec.title,
                        "subject": rec.subject,
                        "source": rec.source,
                        "protected": rec.protected,
                        "date": rec.date.isoformat(),
                        "label": rec.label,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
