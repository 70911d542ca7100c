"""JSON experiment configs and the train / sweep drivers behind the CLI.

A config is one JSON object::

    {
      "loss":    {APLParams fields},
      "dataset": {DatasetSpec fields},
      "model":   {ModelSpec fields, without seed},
      "opt":     {OptSpec fields},
      "ks": [1, 3, 5],
      "val_fraction": 0.2,
      "seeds": [0, 1, 2],
      "output": "results.csv",
      "grid": {"gamma_minus": [1, 2, 3, 4, 5]}
    }

Run seed ``s`` generates data with ``dataset.seed + s`` and initialises
the model with seed ``s``. ``grid`` is only read by sweeps: every key is
an APLParams field and the sweep covers their Cartesian product.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .losses import APLParams
from .synth import DatasetSpec, generate
from .trainer import ModelSpec, OptSpec, TrainHistory, train

TOP_LEVEL = ("loss", "dataset", "model", "opt", "ks", "val_fraction", "seeds", "output", "grid")


class ConfigError(ValueError):
    """A config document failed to parse or validate; ``field`` names the culprit."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    loss: APLParams = field(default_factory=APLParams)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    opt: OptSpec = field(default_factory=OptSpec)
    ks: tuple[int, ...] = (1, 3, 5)
    val_fraction: float = 0.2
    seeds: tuple[int, ...] = (0,)
    output: str | None = None
    grid: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        model = asdict(self.model)
        model.pop("seed")
        return {
            "loss": self.loss.to_dict(),
            "dataset": self.dataset.to_dict(),
            "model": model,
            "opt": asdict(self.opt),
            "ks": list(self.ks),
            "val_fraction": self.val_fraction,
            "seeds": list(self.seeds),
            "output": self.output,
            "grid": {k: list(v) for k, v in self.grid.items()},
        }

    def config_hash(self) -> str:
        """SHA-256 of the resolved config; ``output`` is left out since it does not affect results."""
        content = self.to_dict()
        content.pop("output")
        return canonical_hash(content)


def canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _section(raw: dict, name: str, cls):
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError("must be a JSON object", name)
    for key in data:
        if key not in cls.__dataclass_fields__ or (cls is ModelSpec and key == "seed"):
            raise ConfigError("unknown field", f"{name}.{key}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        first = msg.split()[0] if msg else ""
        culprit = f"{name}.{first}" if first in cls.__dataclass_fields__ else name
        raise ConfigError(msg, culprit) from None


def _int_list(value, name: str) -> tuple[int, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError("must be a non-empty list of integers", name)
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise ConfigError("must be a nonnegative integer", f"{name}[{i}]")
    return tuple(value)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError("unknown top-level field", key)
    ks = _int_list(raw.get("ks", [1, 3, 5]), "ks")
    if any(k < 1 for k in ks):
        raise ConfigError("must be >= 1", "ks")
    seeds = _int_list(raw.get("seeds", [0]), "seeds")
    val_fraction = raw.get("val_fraction", 0.2)
    if not isinstance(val_fraction, (int, float)) or not 0 < val_fraction < 1:
        raise ConfigError("must lie in (0, 1)", "val_fraction")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("must be a string path", "output")
    grid = raw.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("must be a JSON object", "grid")
    for key, values in grid.items():
        if key not in APLParams.__dataclass_fields__:
            raise ConfigError("not an APLParams field", f"grid.{key}")
        if not isinstance(values, list) or not values:
            raise ConfigError("must be a non-empty list", f"grid.{key}")
    cfg = ExperimentConfig(
        loss=_section(raw, "loss", APLParams),
        dataset=_section(raw, "dataset", DatasetSpec),
        model=_section(raw, "model", ModelSpec),
        opt=_section(raw, "opt", OptSpec),
        ks=ks,
        val_fraction=float(val_fraction),
        seeds=seeds,
        output=output,
        grid={k: tuple(v) for k, v in grid.items()},
    )
    if max(cfg.ks) > cfg.dataset.n_classes:
        raise ConfigError(f"largest k exceeds n_classes={cfg.dataset.n_classes}", "ks")
    for point in grid_points(cfg):
        try:
            cfg.loss.replace(**point)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "grid") from None
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return config_from_dict(raw)


def grid_points(cfg: ExperimentConfig) -> list[dict]:
    keys = sorted(cfg.grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(cfg.grid[k] for k in keys))]


@dataclass
class RunResult:
    seed: int
    history: TrainHistory


def run_seed(cfg: ExperimentConfig, seed: int, loss: APLParams | None = None) -> RunResult:
    data = generate(replace(cfg.dataset, seed=cfg.dataset.seed + seed))
    train_set, val_set = data.split(cfg.val_fraction)
    model = replace(cfg.model, seed=seed)
    history = train(model, train_set, loss or cfg.loss, cfg.opt, val_data=val_set, ks=cfg.ks)
    return RunResult(seed, history)


def run_train(cfg: ExperimentConfig) -> list[RunResult]:
    return [run_seed(cfg, s) for s in cfg.seeds]


def mean_final_metrics(results: list[RunResult]) -> dict[str, float]:
    names = results[0].history.metrics[-1].values.keys()
    return {
        name: float(np.mean([r.history.metrics[-1].values[name] for r in results]))
        for name in names
    }


def train_jsonl(results: list[RunResult]) -> str:
    lines = [
        json.dumps({"seed": res.seed, **record})
        for res in results
        for record in res.history.records()
    ]
    return "\n".join(lines) + "\n"


@dataclass
class SweepRow:
    point: dict
    config_hash: str
    metrics: dict[str, float]
    final_train_loss: float


def run_sweep(cfg: ExperimentConfig, rank_by: str = "mAP") -> list[SweepRow]:
    """Train every grid point on every seed; rows sorted by ``rank_by`` desc, then hash."""
    rows = []
    for point in grid_points(cfg):
        loss = cfg.loss.replace(**point)
        results = [run_seed(cfg, s, loss) for s in cfg.seeds]
        point_cfg = replace(cfg, loss=loss, grid={})
        rows.append(
            SweepRow(
                point=point,
                config_hash=point_cfg.config_hash()[:16],
                metrics=mean_final_metrics(results),
                final_train_loss=float(np.mean([r.history.train_loss[-1] for r in results])),
            )
        )
    rows.sort(key=lambda row: (-row.metrics.get(rank_by, float("-inf")), row.config_hash))
    return rows


def sweep_csv(rows: list[SweepRow], header_comment: str | None = None) -> str:
    keys = sorted(rows[0].point) if rows else []
    metric_names = list(rows[0].metrics) if rows else []
    out = []
    if header_comment:
        out.append(f"# {header_comment}")
    out.append(",".join(["rank", "config_hash", *keys, *metric_names, "final_train_loss"]))
    for rank, row in enumerate(rows, start=1):
        cells = [str(rank), row.config_hash]
        cells += [f"{row.point[k]:.9g}" for k in keys]
        cells += [f"{row.metrics[m]:.9g}" for m in metric_names]
        cells.append(f"{row.final_train_loss:.9g}")
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
