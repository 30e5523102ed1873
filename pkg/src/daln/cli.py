"""Command-line entry point: ``daln {train,sweep,gradcheck,export-boundary}``.

Settings resolve as built-in defaults, then a JSON config file (``--config``),
then command-line flags.  Exit codes: 0 success, 1 failed check, 2 bad
configuration or input, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from .data import boundary_grid, load_csv, moons_domains
from .experiments import thread_cap
from .model import load_checkpoint, save_checkpoint
from .trainer import ConfigError, NumericAbort, TrainConfig, train

log = logging.getLogger("daln")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SUMMARY_SCHEMA = 1

# run-spec keys that are not TrainConfig fields
DATA_DEFAULTS = {
    "dataset": "moons",
    "source": None,
    "target": None,
    "n_samples": 300,
    "noise": 0.1,
    "rotation_degrees": 30.0,
    "imbalanced_keep": 38,
    "out": "runs/latest",
}

# flag dest -> run-spec key
FLAG_KEYS = {
    "mode": "mode", "dataset": "dataset", "source": "source", "target": "target",
    "epochs": "epochs", "steps_per_epoch": "steps_per_epoch", "batch_size": "batch_size",
    "lam": "lam", "gamma": "gamma", "seed": "seed", "lr": "lr_classifier", "noise": "noise",
    "rotation_degrees": "rotation_degrees", "imbalanced_keep": "imbalanced_keep",
    "n_samples": "n_samples", "out": "out",
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    # every default is None so that unset flags never override the config file
    p.add_argument("--config", type=Path, help="JSON file of run settings")
    p.add_argument("--mode", choices=["daln", "dann", "dann_nwd", "source_only"])
    p.add_argument("--dataset", choices=["moons", "moons-imbalanced", "csv"])
    p.add_argument("--source", help="labeled source CSV (with --dataset csv)")
    p.add_argument("--target", help="target CSV, labeled or not (with --dataset csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float, help="classifier learning rate; the extractor uses a tenth")
    p.add_argument("--noise", type=float)
    p.add_argument("--rotation-degrees", type=float)
    p.add_argument("--imbalanced-keep", type=int, help="upper-moon target samples kept by moons-imbalanced")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daln", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("train", help="train one model and write its logs"))

    sw = sub.add_parser("sweep", help="train once per value of lambda or gamma")
    _add_run_flags(sw)
    sw.add_argument("--param", choices=["lambda", "gamma"], required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")

    sub.add_parser("gradcheck", help="run the numerical property suites")

    ex = sub.add_parser("export-boundary", help="write the decision boundary of a checkpoint on a grid")
    ex.add_argument("--checkpoint", type=Path, required=True)
    ex.add_argument("--resolution", type=int, default=100)
    ex.add_argument("--x-range", default="-1.5,2.5")
    ex.add_argument("--y-range", default="-1.0,1.5")
    ex.add_argument("--out", type=Path, required=True)
    return parser


def resolve_spec(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags into one flat run spec."""
    spec = dict(DATA_DEFAULTS)
    spec.update(TrainConfig().to_dict())
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        unknown = set(loaded) - set(spec)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        spec.update(loaded)
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            spec[key] = value
    return spec


def split_spec(spec: dict) -> tuple[TrainConfig, dict]:
    cfg_keys = set(TrainConfig().to_dict())
    config = TrainConfig.from_dict({k: v for k, v in spec.items() if k in cfg_keys})
    return config, {k: v for k, v in spec.items() if k not in cfg_keys}


def load_datasets(data_spec: dict, seed: int):
    kind = data_spec["dataset"]
    if kind in ("moons", "moons-imbalanced"):
        keep = data_spec["imbalanced_keep"] if kind == "moons-imbalanced" else None
        try:
            return moons_domains(data_spec["n_samples"], data_spec["noise"], data_spec["rotation_degrees"],
                                 seed, keep)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if kind != "csv":
        raise ConfigError(f"unknown dataset {kind!r}")
    if not data_spec["source"] or not data_spec["target"]:
        raise ConfigError("--dataset csv needs both --source and --target")
    try:
        source = load_csv(data_spec["source"], has_labels=True)
        # a target row as wide as a source row carries a label
        target_labeled = _csv_width(data_spec["target"]) == source.dim + 1
        target = load_csv(data_spec["target"], has_labels=target_labeled, k=source.class_count,
                          domain_tag="target")
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return source, target


def _csv_width(path) -> int:
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if rec and not rec[0].lstrip().startswith("#"):
                return len(rec)
    return 0


def _run(spec: dict) -> dict:
    """Train per ``spec`` and write all artifacts.  Returns the summary."""
    config, data_spec = split_spec(spec)
    source, target = load_datasets(data_spec, config.seed)
    out = Path(data_spec["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    t0 = time.perf_counter()
    model, trainlog = train(config, source, target)
    wall = time.perf_counter() - t0
    trainlog.write(out)
    save_checkpoint(model, out / "checkpoint.json")
    final = trainlog.final
    summary = {
        "schema": SUMMARY_SCHEMA,
        "final_accuracy": final.accuracy,
        "best_accuracy": trainlog.best_accuracy,
        "final_mmd": final.mmd,
        "final_a_distance": final.a_distance,
        "wall_time": wall,
        "config": config.to_dict(),
        # the output path is left out so reruns elsewhere compare equal
        "data": {k: v for k, v in data_spec.items() if k != "out"},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _guarded(spec: dict) -> tuple[int, dict | None]:
    try:
        return EXIT_OK, _run(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None


def cmd_train(args) -> int:
    try:
        spec = resolve_spec(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, summary = _guarded(spec)
    if summary is not None:
        print(f"final accuracy {summary['final_accuracy']:.4f}  best {summary['best_accuracy']:.4f}  "
              f"-> {spec['out']}")
    return code


def _parse_values(raw: str) -> list[float]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values is empty")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {raw!r}") from None


def cmd_sweep(args) -> int:
    try:
        spec = resolve_spec(args)
        values = _parse_values(args.values)
        workers = thread_cap()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    key = "lam" if args.param == "lambda" else "gamma"
    root = Path(spec["out"])
    children = []
    for v in values:
        child = dict(spec)
        child[key] = v
        child["out"] = str(root / f"{args.param}={v!r}")
        children.append(child)
    workers = min(workers, len(children))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_guarded, children))
    else:
        outcomes = [_guarded(c) for c in children]

    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "final_acc", "best_acc"])
        for v, (code, summary) in zip(values, outcomes):
            if summary is None:
                w.writerow([repr(v), "nan", "nan"])
            else:
                w.writerow([repr(v), repr(summary["final_accuracy"]), repr(summary["best_accuracy"])])
    for v, (code, summary) in zip(values, outcomes):
        status = "failed" if summary is None else f"final {summary['final_accuracy']:.4f}  best {summary['best_accuracy']:.4f}"
        print(f"{args.param}={v:g}: {status}")
    return max(code for code, _ in outcomes)


def cmd_gradcheck(args) -> int:
    results = checks.run_all()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _parse_range(raw: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in raw.split(","))
    except ValueError:
        raise ConfigError(f"range must be 'lo,hi', got {raw!r}") from None
    if not lo < hi:
        raise ConfigError(f"range must satisfy lo < hi, got {raw!r}")
    return lo, hi


def cmd_export_boundary(args) -> int:
    try:
        model = load_checkpoint(args.checkpoint)
        if model.extractor.layer_dims[0] != 2:
            raise ConfigError(f"boundary export needs 2-D inputs, checkpoint expects {model.extractor.layer_dims[0]}")
        grid = boundary_grid(_parse_range(args.x_range), _parse_range(args.y_range), args.resolution)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    probs = model.predict_proba(grid)
    pred = np.argmax(probs, axis=1)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["# x", "y", "predicted_class", "p_max"])
        for (x, y), c, p in zip(grid, pred, probs.max(axis=1)):
            w.writerow([repr(float(x)), repr(float(y)), int(c), repr(float(p))])
    print(f"wrote {len(grid)} grid points to {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
    "export-boundary": cmd_export_boundary,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
