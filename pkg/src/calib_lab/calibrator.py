"""Sample-adaptive temperature calibrator.

Per record, the softmax vectors of the M transform channels are
gathered at the indices of the k largest original softmax scores and
concatenated (channel-major) into an M*k feature vector. A small fully
connected network (input -> 5 ReLU -> 1 by default, an extra 5-node
hidden layer behind a config switch) maps the features to a positive
temperature via softplus(o) + tau_min. The temperature rescales the
original logits only; transform outputs never touch the logits.

Training is plain minibatch gradient descent with Adam on one of the
losses in :mod:`calib_lab.losses`, single-threaded and bit-reproducible
for a fixed (seed, config, dataset).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError, TrainingDivergedError
from .losses import DiscrepancyMode, LossKind, dloss_dtau_batch, loss_values
from .records import Dataset, SampleRecord
from .tensor_math import row_softmax, scale_logits, sigmoid, softmax, softplus, top_k_indices

HIDDEN_WIDTH = 5
DEFAULT_TAU_MIN = 0.05


@dataclass(frozen=True)
class CalibratorParams:
    """Weights of the temperature network plus gather/shape metadata.

    ``w1b``/``b1b`` hold the optional second hidden layer and stay None
    for the default single-hidden-layer architecture. Arrays are
    read-only once constructed.
    """

    w1: np.ndarray   # (HIDDEN_WIDTH, M*k)
    b1: np.ndarray   # (HIDDEN_WIDTH,)
    w2: np.ndarray   # (1, HIDDEN_WIDTH)
    b2: float
    tau_min: float
    n_classes: int
    n_transforms: int
    k: int
    w1b: np.ndarray | None = None  # (HIDDEN_WIDTH, HIDDEN_WIDTH)
    b1b: np.ndarray | None = None  # (HIDDEN_WIDTH,)

    def __post_init__(self):
        # Copy before freezing so caller-owned arrays keep their flags.
        w1 = np.array(self.w1, dtype=np.float64)
        b1 = np.array(self.b1, dtype=np.float64)
        w2 = np.array(self.w2, dtype=np.float64)
        d_in = self.n_transforms * self.k
        if w1.shape != (HIDDEN_WIDTH, d_in):
            raise InvalidInputError(
                f"w1 must have shape ({HIDDEN_WIDTH}, {d_in}) for M={self.n_transforms}, "
                f"k={self.k}, got {w1.shape}")
        if b1.shape != (HIDDEN_WIDTH,):
            raise InvalidInputError(f"b1 must have shape ({HIDDEN_WIDTH},), got {b1.shape}")
        if w2.shape != (1, HIDDEN_WIDTH):
            raise InvalidInputError(f"w2 must have shape (1, {HIDDEN_WIDTH}), got {w2.shape}")
        if (self.w1b is None) != (self.b1b is None):
            raise InvalidInputError("w1b and b1b must be provided together")
        w1b = b1b = None
        if self.w1b is not None:
            w1b = np.array(self.w1b, dtype=np.float64)
            b1b = np.array(self.b1b, dtype=np.float64)
            if w1b.shape != (HIDDEN_WIDTH, HIDDEN_WIDTH) or b1b.shape != (HIDDEN_WIDTH,):
                raise InvalidInputError("second hidden layer has inconsistent shapes")
        all_values = [w1, b1, w2] + ([w1b, b1b] if w1b is not None else [])
        if not all(np.all(np.isfinite(a)) for a in all_values) or not np.isfinite(self.b2):
            raise InvalidInputError("parameters contain non-finite values")
        if not (np.isfinite(self.tau_min) and self.tau_min > 0):
            raise InvalidInputError(f"tau_min must be > 0, got {self.tau_min}")
        if not 1 <= self.k <= self.n_classes:
            raise InvalidInputError(f"k={self.k} outside [1, {self.n_classes}]")
        for a in all_values:
            a.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))
        object.__setattr__(self, "w1b", w1b)
        object.__setattr__(self, "b1b", b1b)

    @property
    def input_width(self) -> int:
        return self.n_transforms * self.k


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for calibrator training."""

    loss: LossKind = LossKind.CA
    mode: DiscrepancyMode = DiscrepancyMode.SQUARED_L2
    k: int = 4
    epochs: int = 50
    batch_size: int = 256
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    tau_min: float = DEFAULT_TAU_MIN
    two_hidden: bool = False

    def validate(self, n_classes: int) -> None:
        if not 1 <= self.k <= n_classes:
            raise DomainError(f"k={self.k} outside [1, {n_classes}]")
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise DomainError("learning rate must be > 0")
        if not self.tau_min > 0:
            raise DomainError("tau_min must be > 0")


@dataclass(frozen=True)
class TrainingTrace:
    """Full-training-set loss per epoch; index 0 is the initial loss."""

    losses: np.ndarray

    def __post_init__(self):
        losses = np.array(self.losses, dtype=np.float64)
        losses.setflags(write=False)
        object.__setattr__(self, "losses", losses)

    @property
    def initial(self) -> float:
        return float(self.losses[0])

    @property
    def final(self) -> float:
        return float(self.losses[-1])


@dataclass(frozen=True)
class CalibratedSample:
    tau: float
    probs: np.ndarray
    confidence: float


@dataclass
class ParamGradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    w1b: np.ndarray | None = None
    b1b: np.ndarray | None = None


def build_features(r: SampleRecord, k: int) -> np.ndarray:
    """Gather each transform channel at the record's top-k softmax
    indices; channels are concatenated in order, each in rank order."""
    if not 1 <= k <= r.n_classes:
        raise DomainError(f"k={k} outside [1, {r.n_classes}]")
    q = top_k_indices(softmax(r.logits), k)
    return r.transform_probs[:, q].reshape(-1)


def feature_matrix(d: Dataset, k: int) -> np.ndarray:
    """Vectorized :func:`build_features` over a whole dataset, (n, M*k)."""
    if not 1 <= k <= d.n_classes:
        raise DomainError(f"k={k} outside [1, {d.n_classes}]")
    probs = row_softmax(d.logits)
    q = np.argsort(-probs, axis=1, kind="stable")[:, :k]          # (n, k)
    gathered = np.take_along_axis(d.transform_probs, q[:, None, :], axis=2)
    return gathered.reshape(d.n, d.n_transforms * k)


def _forward_trace(p: CalibratorParams, F: np.ndarray):
    """Forward pass keeping intermediates for backprop."""
    a1 = F @ p.w1.T + p.b1
    h1 = np.maximum(a1, 0.0)
    if p.w1b is not None:
        a2 = h1 @ p.w1b.T + p.b1b
        h_last = np.maximum(a2, 0.0)
    else:
        a2 = None
        h_last = h1
    o = h_last @ p.w2.T + p.b2
    o = o[:, 0]
    tau = softplus(o) + p.tau_min
    return a1, h1, a2, h_last, o, tau


def forward_batch(p: CalibratorParams, F: np.ndarray) -> np.ndarray:
    """Temperatures for a feature matrix, shape (n,)."""
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != p.input_width:
        raise DomainError(f"features must have shape (n, {p.input_width}), got {F.shape}")
    return _forward_trace(p, F)[5]


def forward(p: CalibratorParams, f: np.ndarray) -> float:
    """Temperature for a single feature vector; always >= tau_min."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != p.input_width:
        raise DomainError(f"feature vector must have length {p.input_width}, got shape {f.shape}")
    return float(forward_batch(p, f[None, :])[0])


def calibrate(p: CalibratorParams, r: SampleRecord, k: int | None = None) -> CalibratedSample:
    """Temperature, rescaled softmax vector, and its top score for one
    record. The predicted label is unchanged by construction."""
    k = p.k if k is None else k
    tau = forward(p, build_features(r, k))
    probs = softmax(scale_logits(r.logits, tau))
    predicted = int(np.argmax(r.logits))
    return CalibratedSample(tau=tau, probs=probs, confidence=float(probs[predicted]))


def calibrate_dataset(p: CalibratorParams, d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-record temperatures and calibrated confidences for a dataset."""
    if d.n_classes != p.n_classes or d.n_transforms != p.n_transforms:
        raise DomainError(
            f"dataset (C={d.n_classes}, M={d.n_transforms}) does not match calibrator "
            f"(C={p.n_classes}, M={p.n_transforms})")
    taus = forward_batch(p, feature_matrix(d, p.k))
    P = row_softmax(d.logits / taus[:, None])
    predicted = np.argmax(d.logits, axis=1)
    return taus, P[np.arange(d.n), predicted]


def batch_loss(p: CalibratorParams, F: np.ndarray, Z: np.ndarray, labels: np.ndarray,
               kind: LossKind, mode: DiscrepancyMode) -> float:
    """Mean configured loss of the calibrator on a batch of arrays."""
    taus = forward_batch(p, F)
    return float(np.mean(loss_values(Z, labels, taus, kind, mode)))


def grad_params(p: CalibratorParams, F: np.ndarray, Z: np.ndarray, labels: np.ndarray,
                kind: LossKind = LossKind.CA,
                mode: DiscrepancyMode = DiscrepancyMode.SQUARED_L2) -> ParamGradients:
    """Exact gradient of the mean batch loss with respect to every
    parameter: d(loss)/d(tau) chained through softplus, the linear
    layers, and ReLU (derivative at 0 taken as 0). The batch gradient is
    the mean of per-sample gradients."""
    F = np.asarray(F, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if F.shape[0] == 0:
        raise DomainError("batch must be non-empty")
    n = F.shape[0]
    a1, h1, a2, h_last, o, tau = _forward_trace(p, F)
    dl_dtau = dloss_dtau_batch(Z, labels, tau, kind, mode)
    g_o = dl_dtau * sigmoid(o)                       # (n,)

    g_w2 = (g_o @ h_last)[None, :] / n               # (1, hidden)
    g_b2 = float(np.mean(g_o))
    g_h = g_o[:, None] * p.w2                        # (n, hidden)

    if p.w1b is not None:
        g_a2 = g_h * (a2 > 0)
        g_w1b = g_a2.T @ h1 / n
        g_b1b = g_a2.mean(axis=0)
        g_h1 = g_a2 @ p.w1b
    else:
        g_w1b = g_b1b = None
        g_h1 = g_h
    g_a1 = g_h1 * (a1 > 0)
    g_w1 = g_a1.T @ F / n
    g_b1 = g_a1.mean(axis=0)
    return ParamGradients(w1=g_w1, b1=g_b1, w2=g_w2, b2=g_b2, w1b=g_w1b, b1b=g_b1b)


def softplus_inverse(y: float) -> float:
    """Solve softplus(x) = y for y > 0; stable for large y."""
    if not y > 0:
        raise DomainError("softplus inverse requires a positive value")
    return float(y + np.log1p(-np.exp(-y)))


def init_params(n_classes: int, n_transforms: int, k: int, *, tau_min: float = DEFAULT_TAU_MIN,
                seed: int = 0, two_hidden: bool = False) -> CalibratorParams:
    """Seeded uniform [-a, a] weight init with a = sqrt(6/(fan_in+fan_out));
    biases start at zero."""
    rng = np.random.default_rng(seed)
    d_in = n_transforms * k

    def uniform_init(fan_in, fan_out):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=(fan_out, fan_in))

    w1 = uniform_init(d_in, HIDDEN_WIDTH)
    w1b = b1b = None
    if two_hidden:
        w1b = uniform_init(HIDDEN_WIDTH, HIDDEN_WIDTH)
        b1b = np.zeros(HIDDEN_WIDTH)
    w2 = uniform_init(HIDDEN_WIDTH, 1)
    return CalibratorParams(w1=w1, b1=np.zeros(HIDDEN_WIDTH), w2=w2, b2=0.0,
                            tau_min=tau_min, n_classes=n_classes, n_transforms=n_transforms,
                            k=k, w1b=w1b, b1b=b1b)


def constant_temperature_params(tau: float, n_classes: int, n_transforms: int, k: int,
                                tau_min: float = DEFAULT_TAU_MIN) -> CalibratorParams:
    """Zero-weight calibrator emitting the same temperature for every input."""
    if not tau > tau_min:
        raise DomainError(f"tau must exceed tau_min={tau_min}")
    d_in = n_transforms * k
    return CalibratorParams(
        w1=np.zeros((HIDDEN_WIDTH, d_in)), b1=np.zeros(HIDDEN_WIDTH),
        w2=np.zeros((1, HIDDEN_WIDTH)), b2=softplus_inverse(tau - tau_min),
        tau_min=tau_min, n_classes=n_classes, n_transforms=n_transforms, k=k)


def train(d: Dataset, config: TrainConfig) -> tuple[CalibratorParams, TrainingTrace]:
    """Adam-train the calibrator on a dataset.

    Shuffling, initialization, and updates are all driven by one seeded
    generator, so two runs with equal (seed, config, dataset) produce
    bit-identical parameters. Raises :class:`TrainingDivergedError` the
    first time the logged loss is non-finite.
    """
    config.validate(d.n_classes)
    F = feature_matrix(d, config.k)
    Z = d.logits
    labels = d.labels
    n = d.n

    params = init_params(d.n_classes, d.n_transforms, config.k, tau_min=config.tau_min,
                         seed=config.seed, two_hidden=config.two_hidden)
    # Mutable copies for the update loop; re-frozen on return.
    values = {"w1": params.w1.copy(), "b1": params.b1.copy(),
              "w2": params.w2.copy(), "b2": np.array(params.b2)}
    if config.two_hidden:
        values["w1b"] = params.w1b.copy()
        values["b1b"] = params.b1b.copy()
    adam_m = {k_: np.zeros_like(v) for k_, v in values.items()}
    adam_v = {k_: np.zeros_like(v) for k_, v in values.items()}
    step = 0
    rng = np.random.default_rng(config.seed + 1)

    def current_params() -> CalibratorParams:
        return CalibratorParams(
            w1=values["w1"].copy(), b1=values["b1"].copy(), w2=values["w2"].copy(),
            b2=float(values["b2"]), tau_min=config.tau_min, n_classes=d.n_classes,
            n_transforms=d.n_transforms, k=config.k,
            w1b=values["w1b"].copy() if config.two_hidden else None,
            b1b=values["b1b"].copy() if config.two_hidden else None)

    def full_loss(epoch: int) -> float:
        try:
            value = batch_loss(current_params(), F, Z, labels, config.loss, config.mode)
        except (DomainError, InvalidInputError) as exc:
            raise TrainingDivergedError(epoch, f"diverged at epoch {epoch}: {exc}") from exc
        if not np.isfinite(value):
            raise TrainingDivergedError(epoch)
        return value

    trace = [full_loss(0)]

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            try:
                grads = grad_params(current_params(), F[batch], Z[batch], labels[batch],
                                    config.loss, config.mode)
            except (DomainError, InvalidInputError) as exc:
                # Inputs were validated up front, so a non-finite temperature
                # or parameter mid-run means the optimization blew up.
                raise TrainingDivergedError(epoch, f"diverged at epoch {epoch}: {exc}") from exc
            grad_values = {"w1": grads.w1, "b1": grads.b1, "w2": grads.w2,
                           "b2": np.array(grads.b2)}
            if config.two_hidden:
                grad_values["w1b"] = grads.w1b
                grad_values["b1b"] = grads.b1b
            step += 1
            bias1 = 1.0 - config.beta1 ** step
            bias2 = 1.0 - config.beta2 ** step
            for name, g in grad_values.items():
                adam_m[name] = config.beta1 * adam_m[name] + (1.0 - config.beta1) * g
                adam_v[name] = config.beta2 * adam_v[name] + (1.0 - config.beta2) * g * g
                update = (adam_m[name] / bias1) / (np.sqrt(adam_v[name] / bias2) + config.adam_eps)
                values[name] = values[name] - config.learning_rate * update
            if not all(np.all(np.isfinite(v)) for v in values.values()):
                raise TrainingDivergedError(epoch)
        trace.append(full_loss(epoch))

    return current_params(), TrainingTrace(np.asarray(trace, dtype=np.float64))
