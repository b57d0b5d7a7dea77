"""Experiment driver: multi-seed scoring, pruning sweeps, and report export.

Every derived artifact is a pure function of the ExperimentConfig, so equal
configs produce byte-identical CSV/SVG output. Dataset files are located via
the DATA_DIR environment variable (default ./data).
"""

from __future__ import annotations

import hashlib
import math
import os
import shutil
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from prunekit import report, stats
from prunekit.data import Dataset, load_cifar10, load_mnist, synthetic_gaussian
from prunekit.nn import ModelSpec
from prunekit.scores import (
    RunHandle,
    ScoreKind,
    ScoreTable,
    average_normalized,
    compute_table,
    to_csv,
)
from prunekit.train import TrainConfig, train

DATASETS = ("mnist", "cifar10", "synthetic")
KEEP_MODES = ("highest", "lowest")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def mid_epoch(total_epochs: int) -> int:
    """Early-training score epoch, scaled proportionally to the epoch budget
    (a tenth of the total, never below 1)."""
    return max(1, round(0.1 * total_epochs))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    model: ModelSpec
    train: TrainConfig
    score_runs: int
    score_epochs: tuple[int, ...]
    prune_fractions: tuple[float, ...]
    retrain_trials: int
    keep: str
    output_dir: Path
    master_seed: int
    subset: int = 0
    raw_input_norm: bool = False
    synth_classes: int = 10
    synth_dim: int = 20
    synth_per_class: int = 100

    def __post_init__(self):
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "score_epochs", tuple(int(e) for e in self.score_epochs))
        object.__setattr__(self, "prune_fractions", tuple(float(f) for f in self.prune_fractions))
        if self.dataset not in DATASETS:
            raise ConfigError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.keep not in KEEP_MODES:
            raise ConfigError(f"keep must be one of {KEEP_MODES}, got {self.keep!r}")
        if self.score_runs < 1:
            raise ConfigError("score_runs must be >= 1")
        if self.retrain_trials < 1:
            raise ConfigError("retrain_trials must be >= 1")
        if self.subset < 0:
            raise ConfigError("subset must be >= 0")
        for e in self.score_epochs:
            if not 0 <= e <= self.train.epochs:
                raise ConfigError(f"score epoch {e} outside 0..{self.train.epochs}")
        fr = self.prune_fractions
        if any(not 0 <= f < 1 for f in fr):
            raise ConfigError("prune fractions must lie in [0, 1)")
        if any(a >= b for a, b in zip(fr, fr[1:])):
            raise ConfigError("prune fractions must be strictly increasing")
        if self.synth_classes < 1 or self.synth_dim < 1 or self.synth_per_class < 1:
            raise ConfigError("synthetic fixture sizes must be >= 1")


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from heterogeneous parts (floats go through repr)."""
    text = "\x1f".join(repr(float(p)) if isinstance(p, float) else str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def data_dir() -> Path:
    return Path(os.environ.get("DATA_DIR", "data"))


def _find_file(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{stem}[.gz] not found under {directory}")


def load_dataset_pair(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Train and test splits for the configured dataset, subset applied to train."""
    if cfg.dataset == "mnist":
        d = data_dir()
        train_ds = load_mnist(
            _find_file(d, "train-images-idx3-ubyte"),
            _find_file(d, "train-labels-idx1-ubyte"),
            split="train",
        )
        test_ds = load_mnist(
            _find_file(d, "t10k-images-idx3-ubyte"),
            _find_file(d, "t10k-labels-idx1-ubyte"),
            split="test",
        )
    elif cfg.dataset == "cifar10":
        d = data_dir()
        train_ds = load_cifar10(
            [_find_file(d, f"data_batch_{i}.bin") for i in range(1, 6)], split="train"
        )
        test_ds = load_cifar10([_find_file(d, "test_batch.bin")], split="test")
    else:
        train_ds = synthetic_gaussian(
            cfg.synth_classes, cfg.synth_dim, cfg.synth_per_class, cfg.master_seed, split="train"
        )
        test_ds = synthetic_gaussian(
            cfg.synth_classes,
            cfg.synth_dim,
            max(1, cfg.synth_per_class // 5),
            derive_seed(cfg.master_seed, "synthetic-test"),
            split="test",
        )
    if cfg.subset:
        train_ds = train_ds.take(np.arange(min(cfg.subset, len(train_ds))))
    return train_ds, test_ds


def score_kinds(cfg: ExperimentConfig) -> list[ScoreKind]:
    kinds = [ScoreKind("grand", e) for e in sorted(set(cfg.score_epochs))]
    kinds += [ScoreKind("el2n", e) for e in sorted(set(cfg.score_epochs))]
    kinds.append(ScoreKind("forget", cfg.train.epochs))
    kinds.append(ScoreKind("input_norm"))
    kinds.append(ScoreKind("random"))
    return kinds


def train_score_runs(cfg: ExperimentConfig, train_ds: Dataset, test_ds: Dataset) -> list[RunHandle]:
    """Train the M scoring runs (seeds master_seed + index), checkpointing at
    {0} union score_epochs. Existing run directories are wiped so a re-run
    regenerates identical stores instead of mixing with stale steps."""
    ckpt_epochs = frozenset({0, *cfg.score_epochs})
    runs = []
    for i in range(cfg.score_runs):
        run_id = f"run{i:03d}"
        run_dir = cfg.output_dir / "checkpoints" / run_id
        if run_dir.exists():
            shutil.rmtree(run_dir)
        run_cfg = replace(cfg.train, seed=cfg.master_seed + i, checkpoint_epochs=ckpt_epochs)
        result = train(cfg.model, train_ds, test_ds, run_cfg, run_dir)
        runs.append(RunHandle(run_id, run_dir, cfg.model, result.correctness))
    return runs


def run_scoring(cfg: ExperimentConfig) -> dict[ScoreKind, ScoreTable]:
    """Compute every configured score table and persist each as CSV."""
    train_ds, test_ds = load_dataset_pair(cfg)
    runs = train_score_runs(cfg, train_ds, test_ds)
    tables: dict[ScoreKind, ScoreTable] = {}
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    for kind in score_kinds(cfg):
        table = compute_table(
            kind,
            train_ds,
            runs,
            random_trials=cfg.score_runs,
            random_seed=derive_seed(cfg.master_seed, "random-score"),
            normalized_inputs=not cfg.raw_input_norm,
        )
        tables[kind] = table
        (cfg.output_dir / f"scores_{kind.file_label}.csv").write_text(to_csv(table))
    return tables


def prune(ds: Dataset, scores, fraction: float, keep: str = "highest") -> Dataset:
    """Keep the ceil((1-fraction)*n) examples with the highest (or lowest)
    scores; ties go to the lower example id and the surviving examples stay
    in their original relative order."""
    scores = np.asarray(scores, dtype=np.float64)
    n = len(ds)
    if scores.shape != (n,):
        raise ValueError(f"scores shape {scores.shape} does not match dataset size {n}")
    if not 0 <= fraction < 1:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    if keep not in KEEP_MODES:
        raise ValueError(f"keep must be one of {KEEP_MODES}")
    # Fraction(str(...)) keeps decimal fractions exact so the retained count
    # never gains a spurious +1 from float round-up (e.g. (1-0.7)*10).
    n_keep = math.ceil((1 - Fraction(str(fraction))) * n)
    key = -scores if keep == "highest" else scores
    order = np.argsort(key, kind="stable")  # stable: ties stay id-ascending
    chosen = np.sort(order[:n_keep])
    return ds.take(chosen)


@dataclass(frozen=True)
class SweepRow:
    kind: str
    fraction: float
    trial: int
    test_accuracy: float


@dataclass
class SweepResult:
    rows: tuple[SweepRow, ...]

    def accuracies(self, kind: str, fraction: float) -> list[float]:
        return [
            r.test_accuracy
            for r in self.rows
            if r.kind == kind and r.fraction == fraction
        ]


def sweep_csv(sweep: SweepResult) -> str:
    lines = ["kind,fraction,trial,test_accuracy"]
    for r in sweep.rows:
        lines.append(f"{r.kind},{repr(r.fraction)},{r.trial},{repr(r.test_accuracy)}")
    return "\n".join(lines) + "\n"


def run_sweep(cfg: ExperimentConfig, tables: dict[ScoreKind, ScoreTable]) -> SweepResult:
    """Prune/retrain/evaluate over the (kind, fraction, trial) grid.

    Retrain seeds derive from (master_seed, fraction, trial) only, so at a
    given fraction every kind retrains from the same seed and fraction-0 rows
    coincide across kinds. The random kind prunes by its own trial row.
    """
    train_ds, test_ds = load_dataset_pair(cfg)
    rows = []
    for kind, table in tables.items():
        for fraction in cfg.prune_fractions:
            for trial in range(cfg.retrain_trials):
                if kind.kind == "random":
                    vec = table.trials[trial % table.n_trials]
                else:
                    vec = table.mean
                pruned = prune(train_ds, vec, fraction, cfg.keep)
                seed = derive_seed(cfg.master_seed, "retrain", fraction, trial)
                retrain_cfg = replace(cfg.train, seed=seed, checkpoint_epochs=frozenset())
                result = train(cfg.model, pruned, test_ds, retrain_cfg, None)
                rows.append(SweepRow(kind.label, fraction, trial, result.test_accuracy))
    rows.sort(key=lambda r: (r.kind, r.fraction, r.trial))
    sweep = SweepResult(tuple(rows))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "sweep.csv").write_text(sweep_csv(sweep))
    return sweep


def _sorted_curves(tables: dict[ScoreKind, ScoreTable]):
    """Average-normalized score curves, all re-ordered by the reference
    kind's sort permutation (grand@0 when present)."""
    ref_kind = ScoreKind("grand", 0)
    if ref_kind not in tables:
        ref_kind = next(iter(tables))
    avg = {kind: average_normalized(t) for kind, t in tables.items()}
    _, perm = stats.sorted_curve(avg[ref_kind])
    return ref_kind, {kind: v[perm] for kind, v in avg.items()}


def export_report(
    tables: dict[ScoreKind, ScoreTable], sweep: SweepResult, out_dir
) -> list[Path]:
    """Write every CSV/SVG data product; the file set depends only on the inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str):
        path = out / name
        path.write_text(text)
        written.append(path)

    for kind, table in tables.items():
        emit(f"scores_{kind.file_label}.csv", to_csv(table))
        curve, _ = stats.sorted_curve(average_normalized(table))
        emit(
            f"scores_{kind.file_label}.svg",
            report.line_chart_svg(
                f"{kind.label}: sorted average normalized score",
                "sorted example rank",
                "normalized score",
                [(kind.label, np.arange(curve.size), curve)],
            ),
        )

    emit("sweep.csv", sweep_csv(sweep))
    kinds_in_sweep = sorted({r.kind for r in sweep.rows})
    series = []
    for kind_label in kinds_in_sweep:
        fractions = sorted({r.fraction for r in sweep.rows if r.kind == kind_label})
        means = [float(np.mean(sweep.accuracies(kind_label, f))) for f in fractions]
        series.append((kind_label, fractions, means))
    emit(
        "sweep.svg",
        report.line_chart_svg(
            "test accuracy vs fraction pruned (mean over trials)",
            "fraction of training data pruned",
            "test accuracy",
            series,
        ),
    )

    matrix = stats.correlation_matrix(tables.values())
    emit("corr_matrix.csv", stats.matrix_csv(matrix))
    emit("corr_matrix.svg", report.heatmap_svg("Spearman rank correlations", matrix.labels, matrix.values))

    if tables:
        ref_kind, curves = _sorted_curves(tables)
        n = len(next(iter(curves.values())))
        header = "rank," + ",".join(k.label for k in curves)
        lines = [header]
        for i in range(n):
            lines.append(str(i) + "," + ",".join(repr(float(curves[k][i])) for k in curves))
        emit("sorted_curves.csv", "\n".join(lines) + "\n")
        emit(
            "sorted_curves.svg",
            report.line_chart_svg(
                f"scores ordered by {ref_kind.label}",
                f"example rank under {ref_kind.label}",
                "average normalized score",
                [(k.label, np.arange(n), v) for k, v in curves.items()],
            ),
        )

    grand0 = tables.get(ScoreKind("grand", 0))
    inorm = tables.get(ScoreKind("input_norm"))
    summary = None
    if grand0 is not None and inorm is not None:
        try:
            # zero-norm examples are excluded (and counted) by ratio_summary
            summary = stats.ratio_summary(inorm.mean, grand0.mean)
        except ValueError:
            summary = None
    if summary is not None:
        emit("ratio_hist.csv", stats.histogram_csv(summary))
        emit(
            "ratio_hist.svg",
            report.histogram_svg(
                f"ln(input norm / gradient norm at init), per example"
                + (f" ({summary.n_excluded} zero pairs excluded)" if summary.n_excluded else ""),
                "ln ratio",
                summary.bin_edges,
                summary.counts,
            ),
        )
    else:
        emit("ratio_hist.csv", "bin_left_edge,count\n")
        emit("ratio_hist.svg", report.histogram_svg("ln ratio (unavailable)", "ln ratio", [], []))

    return sorted(written)
