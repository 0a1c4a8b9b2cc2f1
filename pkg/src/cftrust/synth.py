"""Synthetic news-style dataset generator.

Produces a CSV with a known clean generative process so end-to-end runs
have a ground truth: labels are Bernoulli(0.5); titles mix subject topic
words, filler vocabulary, a sentiment term whose polarity correlates with
the label, and a label cue word; dates are uniform over a fixed window.
The process is documented in the output header and is a pure function of
the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date as Date
from datetime import timedelta
from importlib import resources
from pathlib import Path

import numpy as np

from .bias import load_lexicon
from .errors import ConfigError

SUBJECTS = {
    "politics": ["election", "senate", "policy", "government", "vote"],
    "world": ["summit", "border", "treaty", "embassy", "region"],
    "business": ["market", "shares", "earnings", "trade", "deal"],
    "tech": ["startup", "platform", "software", "device", "data"],
    "sports": ["league", "season", "coach", "final", "team"],
    "health": ["study", "hospital", "vaccine", "patients", "clinic"],
}
SUBJECT_PROBS = [0.30, 0.20, 0.18, 0.14, 0.10, 0.08]

SOURCES = [
    "daily-wire-press",
    "metro-herald",
    "national-post-online",
    "city-tribune",
    "global-news-desk",
    "evening-standard-co",
    "the-plain-ledger",
    "coastal-observer",
]

FILLERS = [
    "after", "amid", "analysts", "announce", "before", "campaign", "chief",
    "citizens", "city", "committee", "council", "country", "county", "crowd",
    "debate", "decision", "details", "early", "effort", "experts", "first",
    "funding", "group", "leaders", "local", "major", "measure", "meeting",
    "members", "month", "nation", "new", "officials", "over", "plan",
    "program", "proposal", "public", "record", "residents", "response",
    "results", "review", "rules", "sources", "state", "talks", "under",
    "update", "week", "workers", "year",
]

FAKE_CUES = ["exposed", "shocking", "hoax", "secret", "miracle"]
TRUE_CUES = ["official", "report", "statement", "confirms", "announced"]

START_DATE = Date(2016, 1, 1)
DATE_SPAN_DAYS = 1000

# How often the sentiment term matches the label's polarity, and how often
# a cue word is appended at all.
SENTIMENT_MATCH_RATE = 0.85
CUE_RATE = 0.75


def default_lexicon() -> list[tuple[str, str]]:
    """The packaged 40-pair sentiment-antonym lexicon."""
    with resources.as_file(resources.files("cftrust.data") / "framing_lexicon.txt") as p:
        return load_lexicon(p)


@dataclass
class SynthStats:
    path: str
    rows: int
    positive_rate: float


def generate_synthetic(path: str | Path, n: int, k: int, seed: int) -> SynthStats:
    """Write `n` synthetic records to `path` as CSV.

    Requires n >= 20*k so every batch is large enough to train and score.
    Identical seeds produce byte-identical files.
    """
    if n < 20 * k:
        raise ConfigError(f"need n >= 20*k ({20 * k}) synthetic rows, got {n}")
    rng = np.random.default_rng(seed)
    lexicon = default_lexicon()
    positive_terms = [a for a, _ in lexicon]
    negative_terms = [b for _, b in lexicon]
    subjects = list(SUBJECTS)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    positives = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# synthetic news-style dataset\n")
        fh.write(
            "# process: label~Bernoulli(0.5); protected~Bernoulli(0.5); "
            "subject from a fixed table; date uniform over "
            f"{DATE_SPAN_DAYS} days from {START_DATE.isoformat()};\n"
        )
        fh.write(
            "# title = topic words + filler + sentiment term "
            f"(matches label polarity w.p. {SENTIMENT_MATCH_RATE}) + cue word "
            f"(w.p. {CUE_RATE})\n"
        )
        fh.write(f"# seed={seed} n={n} k={k}\n")
        writer = csv.writer(fh)
        writer.writerow(["id", "title", "subject", "source", "protected", "date", "label"])
        for i in range(n):
            label = int(rng.random() < 0.5)
            protected = int(rng.random() < 0.5)
            subject = subjects[rng.choice(len(subjects), p=SUBJECT_PROBS)]
            source = SOURCES[rng.integers(0, len(SOURCES))]
            day = START_DATE + timedelta(days=int(rng.integers(0, DATE_SPAN_DAYS)))

            topic = list(rng.choice(SUBJECTS[subject], size=2, replace=False))
            filler = list(rng.choice(FILLERS, size=int(rng.integers(2, 5)), replace=False))
            if rng.random() < SENTIMENT_MATCH_RATE:
                sentiment = positive_terms[rng.integers(0, len(positive_terms))] if label else \
                    negative_terms[rng.integers(0, len(negative_terms))]
            else:
                sentiment = negative_terms[rng.integers(0, len(negative_terms))] if label else \
                    positive_terms[rng.integers(0, len(positive_terms))]
            words = topic + filler + [sentiment]
            if rng.random() < CUE_RATE:
                cues = TRUE_CUES if label else FAKE_CUES
                words.append(cues[rng.integers(0, len(cues))])
            order = rng.permutation(len(words))
            title = " ".join(words[j] for j in order)

            positives += label
            writer.writerow(
                [
                    f"rec{i:06d}",
                    title,
                    subject,
                    source,
                    protected,
                    day.isoformat(),
                    "true" if label else "fake",
                ]
            )
    return SynthStats(path=str(path), rows=n, positive_rate=positives / n)
