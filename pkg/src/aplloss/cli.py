"""Command-line entry point: ``aplloss <command> ...``.

Exit status: 0 on success, 1 on runtime failure (or a failed audit),
2 on a malformed config or arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .experiment import (
    ConfigError,
    canonical_hash,
    config_from_dict,
    parse_config,
    run_sweep,
    run_train,
    mean_final_metrics,
    sweep_csv,
    train_jsonl,
)
from .losses import APLParams, bce, taylor_bce
from .trainer import finite_difference_audit

# Figure-caption settings; the APL rows add an adjusted leading coefficient
DEFAULT_FIGURE_PARAMS = {
    1: [
        ("BCE", {}),
        ("ASL", {"gamma_plus": 1.0}),
        ("APL", {"gamma_plus": 1.0, "alpha1": 2.0, "alpha2": 1.0}),
    ],
    2: [
        ("BCE", {}),
        ("ASL", {"gamma_minus": 2.0, "p_th": 0.2}),
        ("APL", {"gamma_minus": 2.0, "p_th": 0.2, "beta1": 2.0}),
    ],
    3: [
        ("BCE", {}),
        ("ASL", {"gamma_minus": 1.8, "p_th": 0.01}),
        ("APL", {"gamma_minus": 1.8, "p_th": 0.01, "beta1": 1.5}),
    ],
}

DEFAULT_PSTAR_PARAMS = {"gamma_minus": 1.8, "p_th": 0.01, "beta1": 1.0}

# Parameter sets checked by `audit` when no --params is given
AUDIT_SUITE = [
    ("bce", {}),
    ("asl", {"gamma_minus": 4.0, "p_th": 0.05}),
    ("text", {"gamma_minus": 3.0, "p_th": 0.05, "alpha1": 2.5}),
    ("text_beta", {"gamma_minus": 3.0, "p_th": 0.05, "beta1": 1.4}),
    ("relation", {"gamma_plus": 1.0, "gamma_minus": 4.0, "p_th": 0.05, "alpha1": 1.4}),
    ("image", {"gamma_minus": 4.0, "p_th": 0.05, "alpha1": 0.0, "alpha2": 3.0}),
    ("mixed", {"gamma_plus": 1.0, "gamma_minus": 4.0, "p_th": 0.05,
               "alpha1": 2.0, "alpha2": 1.0, "beta1": 1.4}),
    ("gradient_fig", {"gamma_minus": 1.8, "p_th": 0.01, "beta1": 1.5}),
    ("imbalance", {"gamma_minus": 2.0, "p_th": 0.05}),
]


class UsageError(Exception):
    pass


def _load_json_arg(value: str, what: str):
    """Parse ``value`` as inline JSON, or as a path to a JSON file."""
    text = value
    path = Path(value)
    if not value.lstrip().startswith(("{", "[")) and path.is_file():
        text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON in {what}: {exc.msg} (column {exc.colno})", line=exc.lineno
        ) from None


def _params_from(obj, what: str) -> APLParams:
    if not isinstance(obj, dict):
        raise ConfigError("must be a JSON object", what)
    try:
        return APLParams.from_dict(obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), what) from None


def _labelled_params(raw) -> list[tuple[str, APLParams]]:
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError("must be a JSON object", f"params[{i}]")
        item = dict(item)
        label = item.pop("label", None)
        params = _params_from(item, f"params[{i}]")
        out.append((label or analysis.series_label(params), params))
    return out


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_curves(args) -> int:
    if args.params is None:
        labelled = [(name, APLParams(**kw)) for name, kw in DEFAULT_FIGURE_PARAMS[args.figure]]
    else:
        labelled = _labelled_params(_load_json_arg(args.params, "--params"))
    grid = analysis.default_grid(args.points)
    figure_id = analysis.FIGURE_NUMBERS[args.figure]
    tables = analysis.emit_curve(
        figure_id,
        [p for _, p in labelled],
        grid=grid,
        labels=[name for name, _ in labelled],
    )
    resolved = {
        "command": "curves",
        "figure": args.figure,
        "points": args.points,
        "params": [{"label": name, **p.to_dict()} for name, p in labelled],
    }
    comment = f"config_sha256={canonical_hash(resolved)}"
    _write(analysis.curves_to_csv(tables, header_comment=comment), args.out)
    return 0


def cmd_pstar(args) -> int:
    raw = DEFAULT_PSTAR_PARAMS if args.params is None else _load_json_arg(args.params, "--params")
    params = _params_from(raw, "params")
    try:
        cp = analysis.find_pstar(params)
    except analysis.NoCriticalPoint as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write(_dump({"params": params.to_dict(), **cp.to_dict()}), args.out)
    return 0


def cmd_taylor_check(args) -> int:
    if args.order < 1:
        raise UsageError("--order must be >= 1")
    grid = np.linspace(0.05, 0.95, args.points)
    worst, worst_p, worst_y = 0.0, None, None
    for y in (1, 0):
        labels = np.full((1, 1), y)
        for p in grid:
            probs = np.array([[p]])
            err = abs(taylor_bce(probs, labels, args.order) - bce(probs, labels).value)
            if err > worst:
                worst, worst_p, worst_y = err, float(p), y
    report = {
        "order": args.order,
        "grid": [0.05, 0.95, args.points],
        "max_abs_error": worst,
        "at_p": worst_p,
        "at_label": worst_y,
    }
    _write(_dump(report), args.out)
    return 0


def _experiment_config(args):
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    raw = json.loads(text)
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("expected KEY=JSON", f"--set {item}")
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value
    if args.out is not None:
        overrides["output"] = args.out
    if args.seeds is not None:
        try:
            overrides["seeds"] = [int(s) for s in args.seeds.split(",")]
        except ValueError:
            raise ConfigError("expected comma-separated integers", "--seeds") from None
    if overrides:
        cfg = config_from_dict({**raw, **overrides})
    return cfg


def cmd_train(args) -> int:
    cfg = _experiment_config(args)
    results = run_train(cfg)
    comment = f"# config_sha256={cfg.config_hash()}\n"
    _write(comment + train_jsonl(results), cfg.output)
    summary = {"config_sha256": cfg.config_hash(), "final": mean_final_metrics(results)}
    if cfg.output is not None:
        sys.stdout.write(_dump(summary))
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    rows = run_sweep(cfg, rank_by=args.rank_by)
    _write(sweep_csv(rows, header_comment=f"config_sha256={cfg.config_hash()}"), cfg.output)
    return 0


def cmd_audit(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.params is None:
        suite = [(name, APLParams(**kw)) for name, kw in AUDIT_SUITE]
    else:
        suite = _labelled_params(_load_json_arg(args.params, "--params"))
    entries = []
    ok = True
    for name, params in suite:
        rep = finite_difference_audit(params, trials=args.trials, seed=args.seed)
        passed = rep.passed(args.tol)
        ok = ok and passed
        entries.append({"name": name, "params": params.to_dict(), "passed": passed, **rep.to_dict()})
    _write(_dump({"tolerance": args.tol, "trials": args.trials, "seed": args.seed,
                  "passed": ok, "results": entries}), args.out)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aplloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="write L+ coefficient, L- loss or L- gradient curve data")
    p.add_argument("--figure", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--params", help="JSON object/list (inline or file); 'label' keys name series")
    p.add_argument("--points", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("pstar", help="locate the negative-gradient peak p*")
    p.add_argument("--params")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pstar)

    p = sub.add_parser("taylor-check", help="max |taylor_bce - bce| on p in [0.05, 0.95]")
    p.add_argument("--order", type=int, default=200)
    p.add_argument("--points", type=int, default=91)
    p.add_argument("--out")
    p.set_defaults(func=cmd_taylor_check)

    for name, func, help_ in (
        ("sweep", cmd_sweep, "train over a grid of loss parameters and rank the results"),
        ("train", cmd_train, "train one configuration"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="overrides the config's output")
        p.add_argument("--seeds", help="comma-separated; overrides the config's seeds")
        p.add_argument("--set", action="append", metavar="KEY=JSON",
                       help="override a top-level config field")
        if name == "sweep":
            p.add_argument("--rank-by", default="mAP")
        p.set_defaults(func=func)

    p = sub.add_parser("audit", help="finite-difference check of the analytic gradients")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
