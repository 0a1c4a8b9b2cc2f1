"""Synthetic bias injection and protected-attribute counterfactuals.

Three injection kinds operate on private copies of a batch, never on the
clean series: subject oversampling (duplication with fresh ids), framing
swaps over a term-pair lexicon, and label drift toward a target positive
rate. Every mutation is logged as an audit event, and every injector is a
deterministic function of its rng seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .ingest import BatchSeries, Record


@dataclass(frozen=True)
class AuditEvent:
    """One recorded mutation: who changed, which field, before and after."""

    kind: str
    batch: int
    record_id: str
    field: str
    before: str
    after: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "batch": self.batch,
            "record_id": self.record_id,
            "field": self.field,
            "before": self.before,
            "after": self.after,
        }


@dataclass(frozen=True)
class CounterfactualPair:
    """A record and its protected-attribute flip; all other fields equal."""

    original: Record
    flipped: Record


@dataclass
class InjectionPlan:
    """Which batches to perturb and how.

    `label_drift` may be a single target positive rate applied to every
    target batch or a per-batch mapping {batch_index: rate}.
    """

    target_batches: list[int] = field(default_factory=list)
    subject: str | None = None
    subject_factor: float = 1.0
    framing_lexicon: list[tuple[str, str]] = field(default_factory=list)
    framing_rate: float = 0.0
    label_drift: float | dict[int, float] | None = None

    def validate(self, k: int, clean_prefix: int) -> None:
        for t in self.target_batches:
            if not clean_prefix <= t <= k - 1:
                raise ConfigError(
                    f"injection target {t} outside [{clean_prefix}, {k - 1}]; "
                    "the clean prefix must stay clean"
                )
        if self.subject_factor < 1.0:
            raise ConfigError("subject oversample factor must be >= 1")
        if not 0.0 <= self.framing_rate <= 1.0:
            raise ConfigError("framing swap rate must be in [0, 1]")
        for rate in self._drift_rates():
            if not 0.0 <= rate <= 1.0:
                raise ConfigError("label drift targets must be in [0, 1]")

    def _drift_rates(self) -> list[float]:
        if self.label_drift is None:
            return []
        if isinstance(self.label_drift, dict):
            return [float(v) for v in self.label_drift.values()]
        return [float(self.label_drift)]

    def drift_target_for(self, batch_index: int) -> float | None:
        if self.label_drift is None:
            return None
        if isinstance(self.label_drift, dict):
            value = self.label_drift.get(batch_index)
            return None if value is None else float(value)
        return float(self.label_drift)


def inject_subject_skew(
    batch: list[Record],
    subject: str,
    factor: float,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> tuple[list[Record], list[AuditEvent]]:
    """Duplicate records of `subject` until its proportion reaches
    min(1, factor * original proportion), within one record of the target.

    Duplicates get fresh ids and the batch is re-sorted by (date, id) so
    the temporal ordering invariant survives.
    """
    if factor < 1.0:
        raise ConfigError("subject oversample factor must be >= 1")
    matching = [i for i, r in enumerate(batch) if r.subject == subject]
    if not matching:
        raise DataError(f"subject {subject!r} absent from batch {batch_index}")
    n, m = len(batch), len(matching)
    target_p = min(1.0, factor * m / n)
    if target_p >= 1.0 and m < n:
        raise ConfigError(
            "target subject proportion 1.0 is unreachable by duplication; "
            "lower the oversample factor"
        )
    dup_count = 0 if target_p >= 1.0 else max(0, math.ceil((target_p * n - m) / (1.0 - target_p)))
    choices = rng.choice(matching, size=dup_count, replace=True) if dup_count else []
    out = list(batch)
    events = []
    for j, idx in enumerate(choices):
        src = batch[int(idx)]
        dup = replace(src, id=f"{src.id}+dup{j}")
        out.append(dup)
        events.append(
            AuditEvent(
                kind="subject_skew",
                batch=batch_index,
                record_id=dup.id,
                field="record",
                before="",
                after=f"duplicate-of:{src.id}",
            )
        )
    out.sort(key=lambda r: (r.date, r.id))
    return out, events


def inject_framing(
    batch: list[Record],
    lexicon: list[tuple[str, str]],
    rate: float,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> tuple[list[Record], list[AuditEvent]]:
    """Swap each lexicon-term occurrence in a title with probability `rate`.

    Draws happen independently per occurrence, in record then token order,
    so the outcome is replayable from the seed. Record count and labels are
    untouched.
    """
    if not lexicon:
        raise ConfigError("framing lexicon is empty")
    table = dict(lexicon)
    out: list[Record] = []
    events: list[AuditEvent] = []
    for rec in batch:
        tokens = rec.title.split()
        changed = False
        for i, tok in enumerate(tokens):
            if tok in table and rng.random() < rate:
                tokens[i] = table[tok]
                changed = True
        if changed:
            new_title = " ".join(tokens)
            events.append(
                AuditEvent(
                    kind="framing",
                    batch=batch_index,
                    record_id=rec.id,
                    field="title",
                    before=rec.title,
                    after=new_title,
                )
            )
            out.append(replace(rec, title=new_title))
        else:
            out.append(rec)
    return out, events


def inject_label_drift(
    batch: list[Record],
    target_pos_rate: float,
    rng: np.random.Generator,
    batch_index: int = 0,
) -> tuple[list[Record], list[AuditEvent]]:
    """Flip uniformly chosen labels until the positive rate hits the target
    within one record. Titles and record count are untouched."""
    if not batch:
        raise DataError("cannot inject label drift into an empty batch")
    n = len(batch)
    labels = np.array([r.label for r in batch])
    target_count = int(round(target_pos_rate * n))
    delta = target_count - int(labels.sum())
    if delta == 0:
        return list(batch), []
    if delta > 0:
        pool = np.flatnonzero(labels == 0)
        new_label = 1
    else:
        pool = np.flatnonzero(labels == 1)
        new_label = 0
    picks = rng.choice(pool, size=abs(delta), replace=False)
    chosen = set(int(i) for i in picks)
    out: list[Record] = []
    events: list[AuditEvent] = []
    for i, rec in enumerate(batch):
        if i in chosen:
            events.append(
                AuditEvent(
                    kind="label_drift",
                    batch=batch_index,
                    record_id=rec.id,
                    field="label",
                    before=str(rec.label),
                    after=str(new_label),
                )
            )
            out.append(replace(rec, label=new_label))
        else:
            out.append(rec)
    return out, events


def make_counterfactual(record: Record) -> CounterfactualPair:
    """Pair a record with its protected-attribute flip."""
    if record.protected not in (0, 1):
        raise DataError(f"record {record.id} has non-binary protected value {record.protected!r}")
    return CounterfactualPair(
        original=record,
        flipped=replace(record, protected=1 - record.protected),
    )


def apply_plan(
    series: BatchSeries,
    plan: InjectionPlan,
    rng: np.random.Generator,
) -> tuple[list[list[Record]], list[AuditEvent]]:
    """Apply the plan to every target batch, in index order.

    Within a batch the order is subject skew, framing, then label drift.
    Clean batches pass through untouched.
    """
    plan.validate(series.k, series.clean_prefix)
    targets = set(plan.target_batches)
    batches: list[list[Record]] = []
    events: list[AuditEvent] = []
    for t, batch in enumerate(series.batches):
        if t not in targets:
            batches.append(batch)
            continue
        mutated = list(batch)
        if plan.subject is not None and plan.subject_factor > 1.0:
            mutated, evs = inject_subject_skew(mutated, plan.subject, plan.subject_factor, rng, t)
            events.extend(evs)
        if plan.framing_lexicon and plan.framing_rate > 0.0:
            mutated, evs = inject_framing(mutated, plan.framing_lexicon, plan.framing_rate, rng, t)
            events.extend(evs)
        drift_target = plan.drift_target_for(t)
        if drift_target is not None:
            mutated, evs = inject_label_drift(mutated, drift_target, rng, t)
            events.extend(evs)
        batches.append(mutated)
    return batches, events


def load_lexicon(path: str | Path) -> list[tuple[str, str]]:
    """Read a two-column (term, replacement) text file; '#' comments allowed."""
    pairs: list[tuple[str, str]] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"lexicon line needs exactly two columns: {raw!r}")
        pairs.append((parts[0], parts[1]))
    if not pairs:
        raise ConfigError(f"lexicon file {path} contains no pairs")
    return pairs
