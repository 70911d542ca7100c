"""Synthetic multi-label data with a controlled positive rate.

Generation uses ``numpy.random.Generator(PCG64(seed))`` and draws, in order:

1. features ``X ~ N(0, 1)`` of shape ``(n_samples, n_features)``
2. weights ``W ~ N(0, 1 / n_features)`` of shape ``(n_features, n_classes)``
3. noise ``E ~ N(0, noise_std^2)`` of shape ``(n_samples, n_classes)``

Each class is labelled positive where ``X @ W + E`` exceeds that column's
``1 - positive_rate`` quantile, so every class has the requested rate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class DatasetSpec:
    n_samples: int = 5000
    n_features: int = 50
    n_classes: int = 20
    positive_rate: float = 0.05
    noise_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_samples", "n_features", "n_classes"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not 0 < self.positive_rate <= 0.5:
            raise ValueError(f"positive_rate must lie in (0, 0.5], got {self.positive_rate!r}")
        if not self.noise_std >= 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, data: dict) -> DatasetSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown DatasetSpec field(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def split(self, val_fraction: float = 0.2) -> tuple[Dataset, Dataset]:
        """Leading rows for training, trailing ``val_fraction`` for validation."""
        if not 0 < val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        n_val = max(1, int(round(self.n_samples * val_fraction)))
        cut = self.n_samples - n_val
        if cut < 1:
            raise ValueError("dataset too small to split")
        return (
            Dataset(self.features[:cut], self.labels[:cut], self.weights),
            Dataset(self.features[cut:], self.labels[cut:], self.weights),
        )


def generate(spec: DatasetSpec) -> Dataset:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    x = rng.standard_normal((spec.n_samples, spec.n_features))
    w = rng.standard_normal((spec.n_features, spec.n_classes)) / np.sqrt(spec.n_features)
    noise = rng.standard_normal((spec.n_samples, spec.n_classes)) * spec.noise_std
    scores = x @ w + noise
    bias = np.quantile(scores, 1.0 - spec.positive_rate, axis=0)
    labels = (scores > bias).astype(np.int8)
    return Dataset(x, labels, w)


def to_csv(data: Dataset) -> str:
    """Header ``x0..x{d-1},y0..y{C-1}`` then one sample per line; floats round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    d, c = data.features.shape[1], data.labels.shape[1]
    writer.writerow([f"x{i}" for i in range(d)] + [f"y{j}" for j in range(c)])
    for xrow, yrow in zip(data.features, data.labels):
        writer.writerow([repr(float(v)) for v in xrow] + [str(int(v)) for v in yrow])
    return buf.getvalue()


def from_csv(text: str) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    xcols = [i for i, name in enumerate(header) if name.startswith("x")]
    ycols = [i for i, name in enumerate(header) if name.startswith("y")]
    arr = np.array(body, dtype=object)
    features = arr[:, xcols].astype(np.float64)
    labels = arr[:, ycols].astype(np.int8)
    return Dataset(features, labels)
