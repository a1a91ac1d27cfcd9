"""Numerically stable vector primitives used by every other module.

All functions operate on 1-D float64 vectors; ``row_softmax`` is the
batched variant used on (n, C) logit matrices. Probabilities destined
for a logarithm are clamped to ``PROB_FLOOR`` by the caller.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InvalidInputError

# Floor applied to probabilities before any logarithm downstream.
PROB_FLOOR = 1e-12


def _as_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise InvalidInputError(f"logit vector must be 1-D with length >= 2, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logit vector contains non-finite entries")
    return z


def softmax(z) -> np.ndarray:
    """Softmax with max-shift for overflow safety."""
    z = _as_logits(z)
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def row_softmax(Z: np.ndarray) -> np.ndarray:
    """Softmax applied to each row of an (n, C) matrix."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise InvalidInputError("logit matrix contains non-finite entries")
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def scale_logits(z, tau: float) -> np.ndarray:
    """Element-wise z / tau; tau must be strictly positive."""
    z = _as_logits(z)
    if not (np.isfinite(tau) and tau > 0):
        raise DomainError(f"temperature must be finite and > 0, got {tau}")
    return z / tau


def top_k_indices(v, k: int) -> np.ndarray:
    """Indices of the k largest entries, descending; ties favor the smaller index."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError(f"expected a 1-D vector, got shape {v.shape}")
    if not 1 <= k <= v.shape[0]:
        raise DomainError(f"k must satisfy 1 <= k <= {v.shape[0]}, got {k}")
    # Stable sort on the negated values keeps equal entries in index order.
    return np.argsort(-v, kind="stable")[:k]


def max_confidence(z, tau: float = 1.0) -> tuple[int, float]:
    """Predicted label and its softmax score under temperature tau.

    The argmax is invariant to tau; only the score changes.
    """
    p = softmax(scale_logits(z, tau))
    label = int(np.argmax(p))
    return label, float(p[label])


def softplus(x):
    """log(1 + e^x), overflow-safe for large |x|."""
    return np.logaddexp(0.0, x)


def sigmoid(x):
    """Logistic function, the derivative of softplus."""
    out = np.empty_like(x, dtype=np.float64) if isinstance(x, np.ndarray) else None
    if out is None:
        return 1.0 / (1.0 + np.exp(-x)) if x >= 0 else np.exp(x) / (1.0 + np.exp(x))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out
