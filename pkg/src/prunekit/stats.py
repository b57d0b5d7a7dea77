"""Rank statistics for score analysis: Spearman correlation, correlation
matrices, sorted-score curves, and log-ratio summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values receive the mean of the ranks they span."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    order = np.argsort(v, kind="stable")
    sv = v[order]
    run_starts = np.concatenate(([0], np.flatnonzero(np.diff(sv) != 0) + 1, [n]))
    ranks = np.empty(n)
    for s, e in zip(run_starts[:-1], run_starts[1:]):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    return ranks


def spearman(a, b) -> float | None:
    """Pearson correlation of average ranks.

    Returns None (explicitly undefined) when either vector is constant;
    callers render that as "n/a" rather than propagating a NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < 2:
        raise ValueError("need at least two observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return None
    ra = average_ranks(a)
    rb = average_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    r = float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, r))


@dataclass
class CorrelationMatrix:
    """Symmetric Spearman matrix over score-kind mean vectors; None marks
    entries that are undefined because a score was constant."""

    labels: list[str]
    values: list[list[float | None]]


def correlation_matrix(tables) -> CorrelationMatrix:
    tables = list(tables)
    labels = [t.kind.label for t in tables]
    sizes = {t.n_examples for t in tables}
    if len(sizes) > 1:
        raise ValueError(f"tables cover different example counts: {sorted(sizes)}")
    means = [t.mean for t in tables]
    k = len(tables)
    values: list[list[float | None]] = [[None] * k for _ in range(k)]
    for i in range(k):
        values[i][i] = 1.0
        for j in range(i + 1, k):
            r = spearman(means[i], means[j])
            values[i][j] = r
            values[j][i] = r
    return CorrelationMatrix(labels, values)


def matrix_csv(matrix: CorrelationMatrix) -> str:
    lines = ["," + ",".join(matrix.labels)]
    for label, row in zip(matrix.labels, matrix.values):
        cells = [label] + ["n/a" if v is None else repr(float(v)) for v in row]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def sorted_curve(scores) -> tuple[np.ndarray, np.ndarray]:
    """Ascending copy of scores plus the permutation that produced it, so a
    second vector can be re-ordered the same way for overlay plots."""
    v = np.asarray(scores, dtype=np.float64)
    perm = np.argsort(v, kind="stable")
    return v[perm], perm


@dataclass
class RatioSummary:
    """Log-ratio distribution summary of numer/denom over paired examples."""

    mean_log: float
    std_log: float
    bin_edges: np.ndarray
    counts: np.ndarray
    n_excluded: int


def ratio_summary(numer, denom, bins: int = 50) -> RatioSummary:
    """Summarize ln(numer/denom): mean, std, and a histogram over mean +- 4 std.

    Pairs where either side is exactly zero are excluded and counted;
    negative entries are an error.
    """
    numer = np.asarray(numer, dtype=np.float64)
    denom = np.asarray(denom, dtype=np.float64)
    if numer.shape != denom.shape or numer.ndim != 1:
        raise ValueError("numer and denom must be 1-D of equal length")
    if np.any(numer < 0) or np.any(denom < 0):
        raise ValueError("ratio_summary requires non-negative inputs")
    keep = (numer > 0) & (denom > 0)
    n_excluded = int(numer.shape[0] - keep.sum())
    if not np.any(keep):
        raise ValueError("no strictly positive pairs to summarize")
    logs = np.log(numer[keep] / denom[keep])
    mean = float(logs.mean())
    std = float(logs.std())
    half_width = 4.0 * std if std > 0 else 1.0
    edges = np.linspace(mean - half_width, mean + half_width, bins + 1)
    counts, _ = np.histogram(logs, bins=edges)
    return RatioSummary(mean, std, edges, counts, n_excluded)


def histogram_csv(summary: RatioSummary) -> str:
    lines = ["bin_left_edge,count"]
    for left, count in zip(summary.bin_edges[:-1], summary.counts):
        lines.append(f"{repr(float(left))},{int(count)}")
    return "\n".join(lines) + "\n"
