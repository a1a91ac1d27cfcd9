"""Calibration and separability metrics.

All metric functions take a confidence vector (entries in (0, 1]) and a
boolean correctness vector of the same length. Values are kept raw in
[0, 1]; the conventional x100 table scaling happens only at CSV export.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError, UndefinedMetricError
from .records import NARROWLY_WRONG_THRESHOLD, Dataset, correctness_view, wrongness_ratios

DEFAULT_BINS = 25


@dataclass(frozen=True)
class MetricsReport:
    """One evaluation row: calibration metrics plus dataset diagnostics."""

    ece: float
    brier: float
    ks: float
    auroc: float
    accuracy: float
    narrowly_wrong_fraction: float
    n: int
    bins: int


def _check_pair(confidences, correct):
    confidences = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if confidences.ndim != 1 or confidences.shape != correct.shape:
        raise InvalidInputError("confidences and correctness must be equal-length 1-D vectors")
    if confidences.size == 0:
        raise DomainError("metrics require at least one sample")
    if np.any(confidences <= 0) or np.any(confidences > 1) or not np.all(np.isfinite(confidences)):
        raise DomainError("confidences must lie in (0, 1]")
    return confidences, correct


def ece(confidences, correct, bins: int = DEFAULT_BINS) -> float:
    """Expected calibration error over `bins` equal-width bins on (0, 1].

    Bins are left-open/right-closed so a confidence of exactly 1 lands
    in the last bin; empty bins contribute nothing.
    """
    confidences, correct = _check_pair(confidences, correct)
    if bins < 1:
        raise DomainError("bins must be >= 1")
    edges = np.linspace(0.0, 1.0, bins + 1)
    # First edge >= c, minus one: the unique b with edges[b] < c <= edges[b+1].
    idx = np.searchsorted(edges, confidences, side="left") - 1
    n = confidences.size
    counts = np.bincount(idx, minlength=bins)
    conf_sums = np.bincount(idx, weights=confidences, minlength=bins)
    acc_sums = np.bincount(idx, weights=correct.astype(np.float64), minlength=bins)
    filled = counts > 0
    gaps = np.abs(conf_sums[filled] / counts[filled] - acc_sums[filled] / counts[filled])
    return float(np.sum(counts[filled] / n * gaps))


def ace(confidences, correct, bins: int = DEFAULT_BINS) -> float:
    """Adaptive (equal-mass) variant of ECE; not part of headline reports."""
    confidences, correct = _check_pair(confidences, correct)
    if bins < 1:
        raise DomainError("bins must be >= 1")
    order = np.argsort(confidences, kind="stable")
    n = confidences.size
    total = 0.0
    for chunk in np.array_split(order, min(bins, n)):
        if chunk.size == 0:
            continue
        gap = abs(float(np.mean(confidences[chunk])) - float(np.mean(correct[chunk])))
        total += (chunk.size / n) * gap
    return total


def brier_top_label(confidences, correct) -> float:
    """Mean squared gap between top-label confidence and correctness."""
    confidences, correct = _check_pair(confidences, correct)
    residual = confidences - correct.astype(np.float64)
    return float(np.mean(residual * residual))


def brier_multiclass(probs, labels) -> float:
    """Full-vector Brier score against one-hot labels (separate from the
    top-label form used in reports)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise InvalidInputError("probs must be (n, C) with matching labels")
    residual = probs.copy()
    residual[np.arange(probs.shape[0]), labels] -= 1.0
    return float(np.mean(np.sum(residual * residual, axis=1)))


def ks_error(confidences, correct) -> float:
    """Max gap between cumulative confidence and cumulative correctness
    over confidence-sorted prefixes (ties kept in original order)."""
    confidences, correct = _check_pair(confidences, correct)
    order = np.argsort(confidences, kind="stable")
    diff = confidences[order] - correct[order].astype(np.float64)
    return float(np.max(np.abs(np.cumsum(diff))) / confidences.size)


def auroc(confidences, correct) -> float:
    """Probability a random correct sample outranks a random wrong one,
    ties counted one half (rank-sum form)."""
    confidences, correct = _check_pair(confidences, correct)
    n_pos = int(np.sum(correct))
    n_neg = confidences.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one correct and one wrong sample")
    ranks = _midranks(confidences)
    u = float(np.sum(ranks[correct])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def narrowly_wrong_fraction(d: Dataset, threshold: float = NARROWLY_WRONG_THRESHOLD) -> float:
    """Share of all samples that are wrongly predicted with a
    ground-truth/predicted probability ratio above the threshold."""
    ratios = wrongness_ratios(d)
    with np.errstate(invalid="ignore"):
        narrow = np.sum(ratios > threshold)
    return float(narrow / d.n)


def report(d: Dataset, confidences=None, bins: int = DEFAULT_BINS) -> MetricsReport:
    """Bundle every metric for a dataset under the given confidences
    (uncalibrated ones when omitted)."""
    view = correctness_view(d)
    if confidences is None:
        confidences = view.confidence
    confidences = np.asarray(confidences, dtype=np.float64)
    if confidences.shape != (d.n,):
        raise InvalidInputError(f"confidences must have shape ({d.n},), got {confidences.shape}")
    return MetricsReport(
        ece=ece(confidences, view.correct, bins),
        brier=brier_top_label(confidences, view.correct),
        ks=ks_error(confidences, view.correct),
        auroc=auroc(confidences, view.correct),
        accuracy=view.accuracy,
        narrowly_wrong_fraction=narrowly_wrong_fraction(d),
        n=d.n,
        bins=bins,
    )
