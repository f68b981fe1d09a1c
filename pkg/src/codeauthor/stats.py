"""Accuracy and the paired Wilcoxon signed-rank test."""

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXACT_MAX_N = 20


def accuracy(predictions: Sequence, labels: Sequence) -> float:
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    if not labels:
        raise ValueError("accuracy of an empty set is undefined")
    return sum(p == y for p, y in zip(predictions, labels)) / len(labels)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    n: int  # pairs left after dropping zero differences
    method: str  # exact | normal | degenerate

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_p(doubled_ranks: np.ndarray, w_plus_doubled: int) -> float:
    """Two-sided exact p from the distribution of the positive rank sum.

    Counts sign assignments whose rank sum is at least as far from the
    null mean as the observed one. Works on doubled ranks so ties stay integral.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks.astype(np.int64):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    sums = np.arange(total + 1)
    extreme = np.abs(2 * sums - total) >= abs(2 * w_plus_doubled - total)
    return min(1.0, int(counts[extreme].sum()) / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    if n < 5:
        warnings.warn(f"only {n} non-zero differences; the test has little power", stacklevel=2)
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = _exact_p(doubled, int(doubled[d > 0].sum()))
        return WilcoxonResult(stat, p, n, "exact")
    mean = n * (n + 1) / 4
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float((tie_sizes ** 3 - tie_sizes).sum()) / 48
    z = (w_plus - mean) / math.sqrt(var) if var > 0 else 0.0
    return WilcoxonResult(stat, min(1.0, math.erfc(abs(z) / math.sqrt(2))), n, "normal")
