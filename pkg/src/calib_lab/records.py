"""Domain data model: per-sample records, datasets, and derived
per-sample quantities (correctness, wrongness degree).

A dataset stores its contents as stacked arrays (logits ``(n, C)``,
labels ``(n,)``, transform softmax outputs ``(n, M, C)``) so the
numeric modules can stay vectorized; ``SampleRecord`` is the
per-record view used by single-sample operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .tensor_math import row_softmax, softmax

# A wrongly predicted sample counts as narrowly wrong when the ratio of
# ground-truth to predicted-class probability exceeds this threshold.
NARROWLY_WRONG_THRESHOLD = 0.5

_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SampleRecord:
    """One classified example: logits, label, and the softmax vectors
    of its M transformed variants."""

    logits: np.ndarray          # (C,)
    label: int
    transform_probs: np.ndarray  # (M, C), rows sum to 1

    def __post_init__(self):
        # Copy before freezing so caller-owned arrays keep their flags.
        logits = np.array(self.logits, dtype=np.float64)
        probs = np.array(self.transform_probs, dtype=np.float64)
        if logits.ndim != 1 or logits.shape[0] < 2:
            raise InvalidInputError(f"logits must be 1-D with C >= 2, got shape {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise InvalidInputError("logits contain non-finite entries")
        c = logits.shape[0]
        if not 0 <= int(self.label) < c:
            raise InvalidInputError(f"label {self.label} outside [0, {c})")
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] != c:
            raise InvalidInputError(
                f"transform_probs must have shape (M, {c}) with M >= 1, got {probs.shape}")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidInputError("transform probabilities must be finite and >= 0")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _PROB_SUM_TOL):
            raise InvalidInputError("transform probability rows must sum to 1 within 1e-9")
        logits.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "logits", logits)
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "transform_probs", probs)

    @property
    def n_classes(self) -> int:
        return self.logits.shape[0]

    @property
    def n_transforms(self) -> int:
        return self.transform_probs.shape[0]


class Dataset:
    """Immutable collection of records sharing class count C and
    transform count M."""

    def __init__(self, logits: np.ndarray, labels: np.ndarray, transform_probs: np.ndarray,
                 record_ids: np.ndarray | None = None):
        logits = np.array(logits, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64)
        probs = np.array(transform_probs, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] == 0 or logits.shape[1] < 2:
            raise InvalidInputError(f"logits must be (n, C) with n >= 1, C >= 2, got {logits.shape}")
        n, c = logits.shape
        if labels.shape != (n,):
            raise InvalidInputError(f"labels must have shape ({n},), got {labels.shape}")
        if probs.ndim != 3 or probs.shape != (n, probs.shape[1], c) or probs.shape[1] < 1:
            raise InvalidInputError(
                f"transform_probs must have shape ({n}, M, {c}) with M >= 1, got {probs.shape}")
        if not np.all(np.isfinite(logits)):
            raise InvalidInputError("logits contain non-finite entries")
        if np.any(labels < 0) or np.any(labels >= c):
            raise InvalidInputError("labels must lie in [0, C)")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidInputError("transform probabilities must be finite and >= 0")
        if np.any(np.abs(probs.sum(axis=2) - 1.0) > _PROB_SUM_TOL):
            raise InvalidInputError("transform probability rows must sum to 1 within 1e-9")
        if record_ids is None:
            record_ids = np.arange(n, dtype=np.int64)
        else:
            record_ids = np.array(record_ids, dtype=np.int64)
            if record_ids.shape != (n,):
                raise InvalidInputError("record_ids must match the number of records")
        for arr in (logits, labels, probs, record_ids):
            arr.setflags(write=False)
        self.logits = logits
        self.labels = labels
        self.transform_probs = probs
        self.record_ids = record_ids

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = list(records)
        if not records:
            raise InvalidInputError("dataset must contain at least one record")
        c = records[0].n_classes
        m = records[0].n_transforms
        for i, r in enumerate(records):
            if r.n_classes != c or r.n_transforms != m:
                raise InvalidInputError(f"record {i} has inconsistent C or M")
        return cls(
            np.stack([r.logits for r in records]),
            np.array([r.label for r in records]),
            np.stack([r.transform_probs for r in records]),
        )

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    @property
    def n_classes(self) -> int:
        return self.logits.shape[1]

    @property
    def n_transforms(self) -> int:
        return self.transform_probs.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> SampleRecord:
        return SampleRecord(self.logits[i], int(self.labels[i]), self.transform_probs[i])

    @property
    def records(self):
        return [self[i] for i in range(self.n)]

    def subset(self, indices) -> "Dataset":
        """Selection-only subset; record contents are preserved bit-exactly."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size == 0:
            raise InvalidInputError("subset must keep at least one record")
        return Dataset(self.logits[indices], self.labels[indices],
                       self.transform_probs[indices], self.record_ids[indices])


@dataclass(frozen=True)
class CorrectnessView:
    """Per-record prediction, correctness flag, and uncalibrated confidence."""

    predicted: np.ndarray   # (n,) argmax labels
    correct: np.ndarray     # (n,) bool
    confidence: np.ndarray  # (n,) max softmax score, uncalibrated

    def __post_init__(self):
        for arr in (self.predicted, self.correct, self.confidence):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.predicted.shape[0]

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.correct))


def correctness_view(d: Dataset) -> CorrectnessView:
    """Predicted label, correctness indicator, and uncalibrated confidence
    for every record. Only the logits and labels matter; transform
    channels never enter."""
    probs = row_softmax(d.logits)
    predicted = np.argmax(probs, axis=1)
    correct = predicted == d.labels
    confidence = probs[np.arange(d.n), predicted]
    return CorrectnessView(predicted.astype(np.int64), correct, confidence)


def wrongness_ratio(r: SampleRecord) -> float:
    """Ground-truth probability over predicted-class probability for a
    wrongly predicted record. Always in (0, 1] since the predicted class
    holds the maximum."""
    p = softmax(r.logits)
    predicted = int(np.argmax(p))
    if predicted == r.label:
        raise DomainError("wrongness ratio is undefined for correctly predicted records")
    return float(p[r.label] / p[predicted])


def wrongness_ratios(d: Dataset) -> np.ndarray:
    """Vectorized wrongness ratios; NaN for correctly predicted records."""
    probs = row_softmax(d.logits)
    predicted = np.argmax(probs, axis=1)
    idx = np.arange(d.n)
    ratios = probs[idx, d.labels] / probs[idx, predicted]
    ratios = np.where(predicted == d.labels, np.nan, ratios)
    return ratios
