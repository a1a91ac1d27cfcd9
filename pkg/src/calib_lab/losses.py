"""Training losses and their temperature derivatives.

Three losses act on a temperature-scaled softmax:

* ``ca`` — correctness-aware: distance between the top softmax score
  and the 0/1 correctness indicator of the (temperature-invariant)
  prediction.
* ``ce`` — cross-entropy against the ground-truth label.
* ``mse`` — squared error against the one-hot label vector.

The module also provides the closed-form lower/upper bounds of the
batch ``ca`` loss, its split into a confidence-gap term (``e_diff``,
wrong vs. paired correct samples) plus a residual-confidence term
(``e_plus``), and analytic d(loss)/d(temperature) for all three losses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError
from .tensor_math import PROB_FLOOR, row_softmax


class DiscrepancyMode(enum.Enum):
    """Distance used between confidence and the correctness indicator."""

    L1 = "l1"
    SQUARED_L2 = "sq"


class LossKind(enum.Enum):
    CA = "ca"
    CE = "ce"
    MSE = "mse"


@dataclass(frozen=True)
class LossBounds:
    """Closed-form range of the batch L1 ``ca`` loss at accuracy rho."""

    lower: float
    upper: float
    rho: float
    n_classes: int


@dataclass(frozen=True)
class Decomposition:
    """Split of the batch L1 ``ca`` loss into a wrong-vs-correct
    confidence gap and a residual correct-confidence term.

    ``reconstruction`` recombines the terms as
    (1-rho) * e_diff + (2*rho - 1) * e_plus + (1-rho); it equals the
    batch loss exactly whenever rho >= 0.5 (``identity_holds``),
    regardless of which correct samples were paired. Below 0.5 the
    numbers are diagnostic only.
    """

    e_diff: float
    e_plus: float
    rho: float
    reconstruction: float
    pairing: str

    @property
    def identity_holds(self) -> bool:
        return self.rho >= 0.5


def _check_confidence(c_hat: float) -> float:
    if not (np.isfinite(c_hat) and 0.0 < c_hat <= 1.0):
        raise DomainError(f"confidence must lie in (0, 1], got {c_hat}")
    return float(c_hat)


def ca_loss(c_hat: float, correct: bool, mode: DiscrepancyMode = DiscrepancyMode.L1) -> float:
    """Per-sample correctness-aware loss: distance from the indicator."""
    c_hat = _check_confidence(c_hat)
    residual = c_hat - (1.0 if correct else 0.0)
    if mode is DiscrepancyMode.L1:
        return abs(residual)
    return residual * residual


def ca_loss_batch(confidences, correct, mode: DiscrepancyMode = DiscrepancyMode.L1) -> float:
    """Mean per-sample correctness-aware loss over a batch."""
    confidences = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if confidences.size == 0:
        raise DomainError("batch must be non-empty")
    if confidences.shape != correct.shape:
        raise InvalidInputError("confidences and correctness flags must have equal length")
    if np.any(confidences <= 0) or np.any(confidences > 1) or not np.all(np.isfinite(confidences)):
        raise DomainError("confidences must lie in (0, 1]")
    residual = confidences - correct.astype(np.float64)
    if mode is DiscrepancyMode.L1:
        return float(np.mean(np.abs(residual)))
    return float(np.mean(residual * residual))


def ca_bounds(rho: float, n_classes: int) -> LossBounds:
    """Lower/upper bound of the batch L1 loss given accuracy rho and C classes."""
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    if n_classes < 2:
        raise DomainError(f"class count must be >= 2, got {n_classes}")
    lower = (1.0 - rho) / n_classes
    upper = lower + (n_classes - 1) / n_classes
    return LossBounds(lower=lower, upper=upper, rho=rho, n_classes=n_classes)


def decompose(confidences, correct, pairing: str = "lowest",
              rng: np.random.Generator | None = None) -> Decomposition:
    """Gap/residual split of the batch L1 loss.

    Wrong samples are paired against an equal-sized subset of correct
    samples: with ``pairing="lowest"`` the correct samples with the
    smallest confidence (deterministic), with ``pairing="random"`` a
    seeded random subset. The recombination identity holds for either
    choice when rho >= 0.5.
    """
    confidences = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct, dtype=bool)
    if confidences.size == 0:
        raise DomainError("batch must be non-empty")
    if np.any(confidences <= 0) or np.any(confidences > 1):
        raise DomainError("confidences must lie in (0, 1]")
    if pairing not in ("lowest", "random"):
        raise DomainError(f"unknown pairing {pairing!r}")

    rho = float(np.mean(correct))
    wrong_conf = confidences[~correct]
    correct_conf = confidences[correct]
    n_pair = min(wrong_conf.size, correct_conf.size)

    if pairing == "lowest":
        order = np.argsort(correct_conf, kind="stable")
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        order = rng.permutation(correct_conf.size)
    paired = correct_conf[order[:n_pair]]
    unpaired = correct_conf[order[n_pair:]]

    e_diff = float(np.mean(wrong_conf) - np.mean(paired)) if n_pair > 0 else 0.0
    e_plus = float(np.mean(1.0 - unpaired)) if unpaired.size > 0 else 0.0
    reconstruction = (1.0 - rho) * e_diff + (2.0 * rho - 1.0) * e_plus + (1.0 - rho)
    return Decomposition(e_diff=e_diff, e_plus=e_plus, rho=rho,
                         reconstruction=float(reconstruction), pairing=pairing)


def ce_loss(p, label: int) -> float:
    """Cross-entropy -log p[label], probabilities floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= label < p.shape[0]:
        raise DomainError(f"label {label} outside [0, {p.shape[0]})")
    return float(-np.log(max(p[label], PROB_FLOOR)))


def mse_loss(p, label: int) -> float:
    """Squared error between the probability vector and the one-hot label."""
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= label < p.shape[0]:
        raise DomainError(f"label {label} outside [0, {p.shape[0]})")
    residual = p.copy()
    residual[label] -= 1.0
    return float(np.dot(residual, residual))


def loss_values(Z, labels, taus, kind: LossKind,
                mode: DiscrepancyMode = DiscrepancyMode.L1) -> np.ndarray:
    """Per-sample loss of softmax(z_i / tau_i) for each row, as configured."""
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    taus = np.asarray(taus, dtype=np.float64)
    if Z.ndim != 2:
        raise InvalidInputError("Z must be an (n, C) matrix")
    n = Z.shape[0]
    if np.any(taus <= 0) or not np.all(np.isfinite(taus)):
        raise DomainError("temperatures must be finite and > 0")
    P = row_softmax(Z / taus[:, None])
    idx = np.arange(n)
    if kind is LossKind.CE:
        return -np.log(np.maximum(P[idx, labels], PROB_FLOOR))
    if kind is LossKind.MSE:
        residual = P.copy()
        residual[idx, labels] -= 1.0
        return np.sum(residual * residual, axis=1)
    # CA: compare the top score against correctness of the tau-invariant argmax.
    predicted = np.argmax(Z, axis=1)
    c_hat = P[idx, predicted]
    indicator = (predicted == labels).astype(np.float64)
    residual = c_hat - indicator
    return np.abs(residual) if mode is DiscrepancyMode.L1 else residual * residual


def loss_at_tau(z, label: int, tau: float, kind: LossKind,
                mode: DiscrepancyMode = DiscrepancyMode.L1) -> float:
    """Single-sample loss at a given temperature."""
    z = np.asarray(z, dtype=np.float64)
    return float(loss_values(z[None, :], np.array([label]), np.array([tau]), kind, mode)[0])


def dloss_dtau_batch(Z, labels, taus, kind: LossKind,
                     mode: DiscrepancyMode = DiscrepancyMode.L1) -> np.ndarray:
    """Analytic derivative of the per-sample loss with respect to its
    temperature.

    With p = softmax(z / tau) the chain rule gives
    dp_c/dtau = -(p_c / tau^2) * (z_c - sum_j p_j z_j), which is folded
    into each loss; the cross-entropy derivative is zero in the floored
    region.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    taus = np.asarray(taus, dtype=np.float64)
    if np.any(taus <= 0) or not np.all(np.isfinite(taus)):
        raise DomainError("temperatures must be finite and > 0")
    n = Z.shape[0]
    idx = np.arange(n)
    P = row_softmax(Z / taus[:, None])
    zbar = np.sum(P * Z, axis=1)
    tau_sq = taus * taus

    if kind is LossKind.CE:
        grad = (Z[idx, labels] - zbar) / tau_sq
        return np.where(P[idx, labels] > PROB_FLOOR, grad, 0.0)
    if kind is LossKind.MSE:
        residual = P.copy()
        residual[idx, labels] -= 1.0
        dP = -(P / tau_sq[:, None]) * (Z - zbar[:, None])
        return np.sum(2.0 * residual * dP, axis=1)
    predicted = np.argmax(Z, axis=1)
    c_hat = P[idx, predicted]
    dc_dtau = -(c_hat / tau_sq) * (Z[idx, predicted] - zbar)
    indicator = (predicted == labels).astype(np.float64)
    if mode is DiscrepancyMode.L1:
        # |c - I|: c > I for wrong samples, c < I for correct ones.
        sign = np.where(indicator == 1.0, -1.0, 1.0)
        return sign * dc_dtau
    return 2.0 * (c_hat - indicator) * dc_dtau


def dloss_dtau(z, label: int, tau: float, kind: LossKind,
               mode: DiscrepancyMode = DiscrepancyMode.L1) -> float:
    """Scalar form of :func:`dloss_dtau_batch`."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise InvalidInputError("z must be a 1-D logit vector")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("z contains non-finite entries")
    return float(dloss_dtau_batch(z[None, :], np.array([label]), np.array([tau]), kind, mode)[0])
