"""Momentum gradient descent for small linear / one-hidden-layer models.

The random stream for a run is ``Generator(PCG64(model.seed))``: parameter
initialisation is drawn first (``W`` for linear; ``W1`` then ``W2`` for
mlp1; biases start at zero), followed by one permutation of the training
rows per epoch.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics
from .losses import APLParams, apl_elementwise, apl_forward_backward, sigmoid
from .synth import Dataset

MODEL_KINDS = ("linear", "mlp1")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "linear"
    hidden_size: int = 32
    init_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.kind == "mlp1" and self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if not np.isfinite(self.init_scale) or self.init_scale < 0:
            raise ValueError("init_scale must be a finite nonnegative number")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    @classmethod
    def from_dict(cls, data: dict) -> ModelSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown ModelSpec field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass(frozen=True)
class OptSpec:
    learning_rate: float = 1.0
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 64

    def __post_init__(self):
        # learning_rate == 0 is accepted: it freezes the parameters
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValueError("learning_rate must be a finite nonnegative number")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")

    @classmethod
    def from_dict(cls, data: dict) -> OptSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown OptSpec field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass
class TrainHistory:
    initial_loss: float
    train_loss: list[float] = field(default_factory=list)
    metrics: list[metrics.MetricReport] = field(default_factory=list)
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def records(self) -> list[dict]:
        out = []
        for epoch, (loss, rep) in enumerate(zip(self.train_loss, self.metrics), start=1):
            record = {"epoch": epoch, "train_loss": round(loss, 12)}
            record.update({k: round(v, 6) for k, v in rep.values.items()})
            out.append(record)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records())


def init_params(spec: ModelSpec, n_features: int, n_classes: int, rng) -> dict[str, np.ndarray]:
    if spec.kind == "linear":
        return {
            "W": rng.normal(0.0, spec.init_scale, (n_features, n_classes)),
            "b": np.zeros(n_classes),
        }
    return {
        "W1": rng.normal(0.0, spec.init_scale, (n_features, spec.hidden_size)),
        "b1": np.zeros(spec.hidden_size),
        "W2": rng.normal(0.0, spec.init_scale, (spec.hidden_size, n_classes)),
        "b2": np.zeros(n_classes),
    }


def forward(params: dict[str, np.ndarray], x: np.ndarray):
    """Logits and the cache needed by :func:`backward`."""
    if "W" in params:
        return x @ params["W"] + params["b"], (x,)
    h = np.tanh(x @ params["W1"] + params["b1"])
    return h @ params["W2"] + params["b2"], (x, h)


def backward(params, cache, dlogits) -> dict[str, np.ndarray]:
    if "W" in params:
        (x,) = cache
        return {"W": x.T @ dlogits, "b": dlogits.sum(axis=0)}
    x, h = cache
    dh = (dlogits @ params["W2"].T) * (1.0 - h * h)
    return {
        "W1": x.T @ dh,
        "b1": dh.sum(axis=0),
        "W2": h.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }


def _check_dims(params, data: Dataset):
    first = params["W"] if "W" in params else params["W1"]
    last = params["b"] if "b" in params else params["b2"]
    if data.features.shape[1] != first.shape[0]:
        raise ValueError(
            f"model expects {first.shape[0]} features, data has {data.features.shape[1]}"
        )
    if data.labels.shape[1] != last.shape[0]:
        raise ValueError(f"model has {last.shape[0]} outputs, data has {data.labels.shape[1]} classes")


def dataset_loss(params, data: Dataset, loss: APLParams) -> float:
    logits, _ = forward(params, data.features)
    return apl_forward_backward(logits, data.labels, loss).value


def evaluate(params, data: Dataset, ks=(1, 3, 5)) -> metrics.MetricReport:
    _check_dims(params, data)
    logits, _ = forward(params, data.features)
    return metrics.report(sigmoid(logits), data.labels, ks=ks, threshold=0.5)


def train(
    model: ModelSpec,
    data: Dataset,
    loss: APLParams,
    opt: OptSpec,
    val_data: Dataset | None = None,
    ks=(1, 3, 5),
) -> TrainHistory:
    """Minibatch momentum descent on the mean APL.

    Per-epoch loss is the full training-set loss after the epoch; metrics are
    computed on ``val_data`` (or on ``data`` when no validation set is given).
    """
    if data.features.shape[0] != data.labels.shape[0]:
        raise ValueError("features and labels have different sample counts")
    rng = np.random.Generator(np.random.PCG64(model.seed))
    n, d = data.features.shape
    params = init_params(model, d, data.labels.shape[1], rng)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    eval_data = val_data if val_data is not None else data
    _check_dims(params, eval_data)

    history = TrainHistory(initial_loss=dataset_loss(params, data, loss))
    for epoch in range(1, opt.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, opt.batch_size):
            idx = order[start:start + opt.batch_size]
            logits, cache = forward(params, data.features[idx])
            if not np.all(np.isfinite(logits)):
                raise TrainingDiverged(epoch)
            out = apl_forward_backward(logits, data.labels[idx], loss)
            grads = backward(params, cache, out.grad)
            for k in params:
                velocity[k] = opt.momentum * velocity[k] - opt.learning_rate * grads[k]
                params[k] = params[k] + velocity[k]
        logits, _ = forward(params, data.features)
        if not np.all(np.isfinite(logits)):
            raise TrainingDiverged(epoch)
        epoch_loss = apl_forward_backward(logits, data.labels, loss).value
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(epoch)
        history.train_loss.append(epoch_loss)
        history.metrics.append(evaluate(params, eval_data, ks))
    history.params = params
    return history


@dataclass
class AuditReport:
    max_rel_err: float
    n_checked: int
    n_excluded: int
    worst: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_err < tol

    def to_dict(self) -> dict:
        return asdict(self)


def finite_difference_audit(
    loss: APLParams,
    trials: int = 200,
    seed: int = 0,
    h: float = 1e-5,
    positive_fraction: float = 0.5,
    logit_scale: float = 4.0,
    kink_band: float = 1e-3,
    floor: float = 1e-8,
) -> AuditReport:
    """Compare analytic logit gradients with central differences.

    Each trial draws a random ``(B, C)`` problem with ``B <= 6, C <= 8``.
    The loss is separable, so every entry is differenced on its own
    per-entry loss and compared against ``N * grad`` of the mean loss.
    Negative entries within ``kink_band`` of ``p_th`` are skipped. The error
    of an entry is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    worst_err, checked, excluded, worst = 0.0, 0, 0, {}
    for _ in range(trials):
        b, c = rng.integers(1, 7), rng.integers(1, 9)
        logits = rng.normal(0.0, logit_scale, (b, c))
        labels = (rng.random((b, c)) < positive_fraction).astype(np.int8)
        out = apl_forward_backward(logits, labels, loss)
        analytic = out.grad * logits.size
        up, _ = apl_elementwise(logits + h, labels, loss)
        down, _ = apl_elementwise(logits - h, labels, loss)
        numeric = (up - down) / (2.0 * h)
        p = sigmoid(logits)
        skip = (labels == 0) & (np.abs(p - loss.p_th) < kink_band)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        err = np.where(skip, 0.0, np.abs(analytic - numeric) / denom)
        excluded += int(skip.sum())
        checked += int((~skip).sum())
        i = np.unravel_index(np.argmax(err), err.shape)
        if err[i] > worst_err:
            worst_err = float(err[i])
            worst = {
                "logit": float(logits[i]),
                "label": int(labels[i]),
                "analytic": float(analytic[i]),
                "numeric": float(numeric[i]),
            }
    return AuditReport(worst_err, checked, excluded, worst)
