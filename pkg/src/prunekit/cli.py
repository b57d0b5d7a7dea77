"""Command-line interface.

Subcommands: score, sweep, correlate, report, oracle-check. Experiment
settings come from flags and/or a plain key=value config file (flags win).
Exit codes: 0 success, 2 configuration/validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from prunekit import _kernels
from prunekit.harness import (
    DATASETS,
    KEEP_MODES,
    ConfigError,
    ExperimentConfig,
    export_report,
    mid_epoch,
    run_scoring,
    run_sweep,
)
from prunekit.nn import ACTIVATIONS, INITS, ModelSpec, Params
from prunekit.oracle import LinearModel, closed_form_grad_norm
from prunekit.scores import grand_one
from prunekit.stats import correlation_matrix, matrix_csv
from prunekit.train import TrainConfig

_CONFIG_KEYS = (
    "dataset",
    "model",
    "activation",
    "init",
    "bias",
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "runs",
    "score_epochs",
    "fractions",
    "retrain_trials",
    "keep",
    "seed",
    "out",
    "subset",
    "raw_input_norm",
    "synth_classes",
    "synth_dim",
    "synth_per_class",
)

_DEFAULTS = {
    "dataset": "synthetic",
    "activation": "relu",
    "init": "he_normal",
    "bias": "true",
    "epochs": "10",
    "batch_size": "64",
    "lr": "0.05",
    "momentum": "0.9",
    "runs": "20",
    "fractions": "0,0.3,0.5,0.7",
    "retrain_trials": "3",
    "keep": "highest",
    "seed": "0",
    "out": "out",
    "subset": "0",
    "raw_input_norm": "false",
    "synth_classes": "10",
    "synth_dim": "20",
    "synth_per_class": "100",
}


def _parse_bool(value, key: str) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be true or false, got {value!r}")


def _parse_ints(value, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in str(value).split(",") if p.strip() != "")
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated integers, got {value!r}") from None


def _parse_floats(value, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in str(value).split(",") if p.strip() != "")
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated numbers, got {value!r}") from None


def read_config_file(path) -> dict[str, str]:
    """Parse a plain key=value file; # starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(raw: dict) -> ExperimentConfig:
    """Turn a merged key->value mapping into a validated ExperimentConfig."""
    values = dict(_DEFAULTS)
    values.update({k: v for k, v in raw.items() if v is not None})

    dataset = str(values["dataset"])
    epochs = int(values["epochs"])
    seed = int(values["seed"])
    synth_classes = int(values["synth_classes"])
    synth_dim = int(values["synth_dim"])

    model_value = values.get("model")
    if model_value is None:
        widths = {
            "mnist": (784, 128, 10),
            "cifar10": (3072, 128, 10),
            "synthetic": (synth_dim, 32, synth_classes),
        }.get(dataset, (synth_dim, 32, synth_classes))
    else:
        widths = _parse_ints(model_value, "model")

    score_epochs = values.get("score_epochs")
    if score_epochs is None:
        epoch_list: tuple[int, ...] = (0, mid_epoch(epochs))
    else:
        epoch_list = _parse_ints(score_epochs, "score_epochs")

    try:
        spec = ModelSpec(
            widths,
            activation=str(values["activation"]),
            init=str(values["init"]),
            bias=_parse_bool(values["bias"], "bias"),
        )
        train_cfg = TrainConfig(
            epochs=epochs,
            batch_size=int(values["batch_size"]),
            learning_rate=float(values["lr"]),
            momentum=float(values["momentum"]),
            seed=seed,
        )
        return ExperimentConfig(
            dataset=dataset,
            model=spec,
            train=train_cfg,
            score_runs=int(values["runs"]),
            score_epochs=epoch_list,
            prune_fractions=_parse_floats(values["fractions"], "fractions"),
            retrain_trials=int(values["retrain_trials"]),
            keep=str(values["keep"]),
            output_dir=Path(values["out"]),
            master_seed=seed,
            subset=int(values["subset"]),
            raw_input_norm=_parse_bool(values["raw_input_norm"], "raw_input_norm"),
            synth_classes=synth_classes,
            synth_dim=synth_dim,
            synth_per_class=int(values["synth_per_class"]),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--dataset", choices=DATASETS)
    p.add_argument("--model", help="comma-separated layer widths, e.g. 784,128,10")
    p.add_argument("--activation", choices=ACTIVATIONS)
    p.add_argument("--init", choices=INITS)
    p.add_argument("--bias", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--runs", type=int, help="number of scoring runs M")
    p.add_argument("--score-epochs", dest="score_epochs", help="e.g. 0,1")
    p.add_argument("--fractions", help="e.g. 0.1,0.3,0.5,0.7")
    p.add_argument("--retrain-trials", type=int, dest="retrain_trials")
    p.add_argument("--keep", choices=KEEP_MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--subset", type=int, help="use only the first N training examples")
    p.add_argument("--raw-input-norm", action=argparse.BooleanOptionalAction, default=None,
                   dest="raw_input_norm")
    p.add_argument("--synth-classes", type=int, dest="synth_classes")
    p.add_argument("--synth-dim", type=int, dest="synth_dim")
    p.add_argument("--synth-per-class", type=int, dest="synth_per_class")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prunekit",
        description="Dataset-pruning scores and experiments over a small MLP core.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("score", "train scoring runs and write every score table as CSV"),
        ("sweep", "scores plus the prune/retrain accuracy sweep"),
        ("correlate", "scores plus the Spearman correlation matrix"),
        ("report", "full pipeline: scores, sweep, correlations, SVG figures"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_experiment_flags(p)
    oc = sub.add_parser("oracle-check", help="compare gradient-norm score to the closed form")
    oc.add_argument("--instances", type=int, default=1000)
    oc.add_argument("--classes", type=int, default=10)
    oc.add_argument("--dim", type=int, default=50)
    oc.add_argument("--seed", type=int, default=0)
    oc.add_argument("--tolerance", type=float, default=1e-9)
    return parser


def _assemble_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        raw.update(read_config_file(args.config))
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    return build_config(raw)


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.instances):
        w = rng.normal(0.0, (2.0 / args.dim) ** 0.5, size=(args.classes, args.dim))
        x = rng.standard_normal(args.dim)
        y = int(rng.integers(args.classes))
        params = Params([np.ascontiguousarray(w)], [None], activation="identity")
        got = grand_one(params, x, y)
        want = closed_form_grad_norm(LinearModel(w), x, y)
        worst = max(worst, abs(got - want) / abs(want))
    ok = worst < args.tolerance
    print(
        f"oracle-check: {args.instances} instances (C={args.classes}, d={args.dim}), "
        f"max relative error {worst:.3e} ({'PASS' if ok else 'FAIL'} at {args.tolerance:g})"
    )
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle-check":
            return cmd_oracle_check(args)
        cfg = _assemble_config(args)
        print(f"kernel backend: {_kernels.BACKEND}")
        tables = run_scoring(cfg)
        print(f"wrote {len(tables)} score tables under {cfg.output_dir}")
        if args.command == "score":
            return 0
        if args.command in ("sweep", "report"):
            sweep = run_sweep(cfg, tables)
            print(f"wrote sweep.csv ({len(sweep.rows)} rows)")
        if args.command == "correlate":
            matrix = correlation_matrix(tables.values())
            out = cfg.output_dir / "corr_matrix.csv"
            out.write_text(matrix_csv(matrix))
            print(f"wrote {out}")
            return 0
        if args.command == "report":
            written = export_report(tables, sweep, cfg.output_dir)
            print(f"report: {len(written)} files under {cfg.output_dir}")
        return 0
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures map to exit code 1
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
