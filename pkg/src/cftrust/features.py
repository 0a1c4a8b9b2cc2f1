"""Featurization: hashed bag-of-tokens text block plus metadata columns.

The assembled vector per record is

    [ text_0 .. text_{dim-1} | subject_code | source_code | protected | date_norm ]

Text tokens are hashed with a keyed blake2b digest (stable across runs
and platforms), counted, and each hash component is scaled by its maximum
over the fit records. Categorical values map to ordinal codes assigned in
sorted order with 0 reserved for empty/unseen values. Dates map to a
[0, 1] scalar over the fit range.

The date column is excluded from `drift_columns`: it is the batching axis
and drifts by construction, so feeding it to the drift detectors would
flag every later batch regardless of content.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .ingest import Record

DEFAULT_TEXT_DIM = 256
DEFAULT_HASH_SEED = 9176


def token_index(token: str, dim: int, seed: int) -> int:
    """Stable hash bucket for a token: blake2b of 'seed:token' mod dim."""
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


@dataclass
class FeatureVector:
    """Assembled per-record features: the numeric vector plus the raw
    ordinal codes of the categorical columns."""

    values: np.ndarray
    categorical_codes: dict[str, int]


@dataclass
class FeatureSchema:
    """Everything needed to reproduce the feature layout of a fit run."""

    text_dim: int
    hash_seed: int
    subject_codes: dict[str, int]
    source_codes: dict[str, int]
    text_max: np.ndarray
    date_min: int
    date_max: int

    @property
    def total_dim(self) -> int:
        return self.text_dim + 4

    @property
    def subject_column(self) -> int:
        return self.text_dim

    @property
    def source_column(self) -> int:
        return self.text_dim + 1

    @property
    def protected_column(self) -> int:
        return self.text_dim + 2

    @property
    def date_column(self) -> int:
        return self.text_dim + 3

    @property
    def drift_columns(self) -> np.ndarray:
        """All columns except the date scalar (the batching axis)."""
        return np.arange(self.total_dim - 1)

    @property
    def groups(self) -> dict[str, np.ndarray]:
        """Named column groups used for permutation importance."""
        return {
            "text": np.arange(self.text_dim),
            "subject": np.array([self.subject_column]),
            "source": np.array([self.source_column]),
            "protected": np.array([self.protected_column]),
            "date": np.array([self.date_column]),
        }

    def hash_digest(self) -> str:
        """Content hash used to detect model/featurizer mismatches."""
        payload = json.dumps(
            {
                "text_dim": self.text_dim,
                "hash_seed": self.hash_seed,
                "subject_codes": self.subject_codes,
                "source_codes": self.source_codes,
                "text_max": [float(v) for v in self.text_max],
                "date_min": self.date_min,
                "date_max": self.date_max,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class Featurizer:
    """Fit on a reference record set, then transform any records.

    Fitting computes the per-component text maxima, the categorical code
    maps, and the date range. Transformation is pure per record.
    """

    text_dim: int = DEFAULT_TEXT_DIM
    hash_seed: int = DEFAULT_HASH_SEED
    schema: FeatureSchema | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.text_dim < 8:
            raise ConfigError("text dimension below 8 is too coarse to be meaningful")

    def fit(self, records: list[Record]) -> "Featurizer":
        if not records:
            raise ConfigError("cannot fit a featurizer on zero records")
        counts = np.zeros((len(records), self.text_dim))
        for i, rec in enumerate(records):
            self._count_tokens(rec.title, counts[i])
        subjects = sorted({r.subject for r in records if r.subject})
        sources = sorted({r.source for r in records if r.source})
        ordinals = [r.date.toordinal() for r in records]
        text_max = counts.max(axis=0)
        self.schema = FeatureSchema(
            text_dim=self.text_dim,
            hash_seed=self.hash_seed,
            subject_codes={s: i + 1 for i, s in enumerate(subjects)},
            source_codes={s: i + 1 for i, s in enumerate(sources)},
            text_max=np.maximum(text_max, 1.0),
            date_min=min(ordinals),
            date_max=max(ordinals),
        )
        return self

    def _count_tokens(self, title: str, out: np.ndarray) -> None:
        for token in title.split():
            out[token_index(token, self.text_dim, self.hash_seed)] += 1.0

    def transform(self, records: list[Record]) -> np.ndarray:
        """Feature matrix of shape (n, text_dim + 4), float64."""
        schema = self._require_schema()
        X = np.zeros((len(records), schema.total_dim))
        span = max(schema.date_max - schema.date_min, 1)
        for i, rec in enumerate(records):
            self._count_tokens(rec.title, X[i, : schema.text_dim])
            X[i, : schema.text_dim] /= schema.text_max
            X[i, schema.subject_column] = schema.subject_codes.get(rec.subject, 0)
            X[i, schema.source_column] = schema.source_codes.get(rec.source, 0)
            X[i, schema.protected_column] = rec.protected
            X[i, schema.date_column] = min(
                max((rec.date.toordinal() - schema.date_min) / span, 0.0), 1.0
            )
        return X

    def featurize_record(self, record: Record) -> FeatureVector:
        schema = self._require_schema()
        values = self.transform([record])[0]
        return FeatureVector(
            values=values,
            categorical_codes={
                "subject": schema.subject_codes.get(record.subject, 0),
                "source": schema.source_codes.get(record.source, 0),
            },
        )

    def labels(self, records: list[Record]) -> np.ndarray:
        return np.array([r.label for r in records], dtype=np.int64)

    def _require_schema(self) -> FeatureSchema:
        if self.schema is None:
            raise ConfigError("featurizer used before fit()")
        return self.schema
