"""Histogram-based divergence metrics (natural-log units).

Proportions are floored at 1e-6 and renormalized before any log, so PSI
and JSD stay defined for empty bins. PSI is nonnegative term by term;
JSD is symmetric and bounded by ln 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError

PROPORTION_FLOOR = 1e-6
DEFAULT_BINS = 10


@dataclass
class Histogram:
    """Bin edges (length m+1) and floored proportions (length m, sum 1)."""

    bin_edges: np.ndarray
    proportions: np.ndarray


def build_histogram(
    values: np.ndarray,
    reference_edges: np.ndarray | None = None,
    bins: int = DEFAULT_BINS,
) -> Histogram:
    """Histogram over quantile bins (or the given reference edges).

    Without reference edges, edges are the deciles of `values`; duplicate
    quantiles collapse, and a constant input degenerates to a single bin.
    Values outside the edges are clipped into the boundary bins.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot build a histogram from zero values")
    if reference_edges is None:
        edges = np.unique(np.quantile(values, np.linspace(0.0, 1.0, bins + 1)))
        if edges.size == 1:
            edges = np.array([edges[0], edges[0]])
    else:
        edges = np.asarray(reference_edges, dtype=np.float64)
        if edges.size < 2:
            raise DataError("reference edges must describe at least one bin")
    # Clip-then-count: anything beyond the outer edges lands in the end bins.
    idx = np.searchsorted(edges[1:-1], values, side="right")
    counts = np.bincount(idx, minlength=edges.size - 1).astype(np.float64)
    props = counts / counts.sum()
    # Floored bins sit at exactly the floor; only the remaining mass is
    # rescaled, so the floor survives renormalization.
    low = props <= PROPORTION_FLOOR
    if low.any():
        scale = (1.0 - low.sum() * PROPORTION_FLOOR) / props[~low].sum()
        props = np.where(low, PROPORTION_FLOOR, props * scale)
        props = np.maximum(props, PROPORTION_FLOOR)
    return Histogram(bin_edges=edges, proportions=props)


def _check_edges(a: Histogram, b: Histogram) -> None:
    if a.bin_edges.shape != b.bin_edges.shape or not np.array_equal(a.bin_edges, b.bin_edges):
        raise DataError("histograms use different bin edges")


def psi(expected: Histogram, actual: Histogram) -> float:
    """Population stability index: sum (A - E) * ln(A / E), in nats."""
    _check_edges(expected, actual)
    e, a = expected.proportions, actual.proportions
    return float(np.sum((a - e) * np.log(a / e)))


def jsd(p: Histogram, q: Histogram) -> float:
    """Jensen-Shannon divergence in nats: 0.5 KL(P||M) + 0.5 KL(Q||M)."""
    _check_edges(p, q)
    pp, qq = p.proportions, q.proportions
    m = 0.5 * (pp + qq)
    return float(0.5 * np.sum(pp * np.log(pp / m)) + 0.5 * np.sum(qq * np.log(qq / m)))
