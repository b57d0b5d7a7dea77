"""Per-example importance scores and their aggregation across trials.

Five kinds: grand (per-example gradient norm), el2n (squared error-vector
norm by default), input_norm, forget (forgetting counts), and random.
A ScoreTable holds one row per trial plus the per-example mean; rows follow
dataset order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from prunekit import _kernels, checkpoint
from prunekit.data import Dataset, input_norms
from prunekit.nn import ModelSpec, Params, _check_input, _check_label, forward
from prunekit.train import forget_counts

SCORE_KINDS = ("grand", "el2n", "input_norm", "forget", "random")
_EPOCH_KINDS = ("grand", "el2n", "forget")


@dataclass(frozen=True)
class ScoreKind:
    """A score family plus, where meaningful, the epoch its checkpoint is taken at."""

    kind: str
    score_epoch: int | None = None

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind in _EPOCH_KINDS:
            if self.score_epoch is None:
                raise ValueError(f"{self.kind} needs a score_epoch")
            if self.score_epoch < 0:
                raise ValueError("score_epoch must be >= 0")
        elif self.score_epoch is not None:
            raise ValueError(f"{self.kind} carries no epoch")

    @property
    def label(self) -> str:
        return self.kind if self.score_epoch is None else f"{self.kind}@{self.score_epoch}"

    @property
    def file_label(self) -> str:
        return self.kind if self.score_epoch is None else f"{self.kind}_{self.score_epoch}"


@dataclass
class RunHandle:
    """One completed training run: its checkpoint directory and bookkeeping."""

    run_id: str
    ckpt_dir: Path
    spec: ModelSpec
    correctness: np.ndarray | None = None


@dataclass
class ScoreTable:
    kind: ScoreKind
    example_ids: np.ndarray
    trials: np.ndarray  # (n_trials, n_examples)
    mean: np.ndarray

    @classmethod
    def from_trials(cls, kind: ScoreKind, example_ids, rows) -> "ScoreTable":
        trials = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
        if trials.shape[0] < 1:
            raise ValueError("a score table needs at least one trial row")
        return cls(kind, np.asarray(example_ids, dtype=np.int64), trials, trials.mean(axis=0))

    @property
    def n_examples(self) -> int:
        return self.trials.shape[1]

    @property
    def n_trials(self) -> int:
        return self.trials.shape[0]


def grand_one(params: Params, x, y) -> float:
    """Euclidean norm of this example's full loss gradient (one parameter draw)."""
    x = _check_input(params, x)
    y = _check_label(params, y)
    return float(
        _kernels.grand_norm_one(params.weights, params.biases, params.activation == "relu", x, y)
    )


def el2n_one(params: Params, x, y, squared: bool = True) -> float:
    """Squared L2 norm of softmax(f(x)) minus the one-hot label (or its root)."""
    _, probs = forward(params, x)
    y = _check_label(params, y)
    err = probs.copy()
    err[y] -= 1.0
    value = float(np.dot(err, err))
    return value if squared else math.sqrt(value)


def _restore_run(run: RunHandle, epoch: int) -> Params:
    # Missing steps surface as StepNotFoundError; never substituted.
    return checkpoint.restore(run.ckpt_dir, step=epoch, activation=run.spec.activation)


def compute_table(
    kind: ScoreKind,
    ds: Dataset,
    runs=(),
    *,
    random_trials: int = 1,
    random_seed: int = 0,
    normalized_inputs: bool = True,
) -> ScoreTable:
    """Assemble the trial matrix for one score kind over a dataset.

    grand/el2n score every example against each run's checkpoint at
    kind.score_epoch; forget turns each run's correctness matrix into
    forgetting counts; input_norm is a single row; random draws
    random_trials iid Uniform[0,1) rows from random_seed.
    """
    runs = list(runs)
    n = len(ds)
    if kind.kind in ("grand", "el2n"):
        if not runs:
            raise ValueError(f"{kind.label} needs at least one run")
        rows = np.empty((len(runs), n))
        for r, run in enumerate(runs):
            params = _restore_run(run, kind.score_epoch)
            score = grand_one if kind.kind == "grand" else el2n_one
            for i in range(n):
                rows[r, i] = score(params, ds.xs[i], int(ds.ys[i]))
        return ScoreTable.from_trials(kind, ds.ids, rows)
    if kind.kind == "forget":
        if not runs:
            raise ValueError("forget needs at least one run")
        rows = np.empty((len(runs), n))
        for r, run in enumerate(runs):
            if run.correctness is None:
                raise ValueError(f"run {run.run_id} has no correctness matrix")
            if kind.score_epoch > run.correctness.shape[1]:
                raise ValueError(
                    f"forget@{kind.score_epoch} exceeds the {run.correctness.shape[1]} recorded epochs"
                )
            rows[r] = forget_counts(run.correctness[:, : kind.score_epoch])
        return ScoreTable.from_trials(kind, ds.ids, rows)
    if kind.kind == "input_norm":
        return ScoreTable.from_trials(kind, ds.ids, input_norms(ds, normalized=normalized_inputs))
    # random
    if random_trials < 1:
        raise ValueError("random needs at least one trial")
    rng = np.random.default_rng(random_seed)
    return ScoreTable.from_trials(kind, ds.ids, rng.random((random_trials, n)))


def normalize(scores) -> np.ndarray:
    """Shift/scale into [0,1]: (s - min) / (max - min); all zeros when max == min."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 1:
        raise ValueError("normalize expects a non-empty 1-D vector")
    span = s.max() - s.min()
    if span == 0.0:
        return np.zeros_like(s)
    return (s - s.min()) / span


def average_normalized(table: ScoreTable) -> np.ndarray:
    """Normalize each trial row to [0,1] independently, then average per example."""
    return np.mean([normalize(row) for row in table.trials], axis=0)


def _fmt(v: float) -> str:
    return repr(float(v))


def to_csv(table: ScoreTable) -> str:
    """CSV with header example_id,trial_0,...,trial_{M-1},mean in dataset order."""
    header = "example_id," + ",".join(f"trial_{t}" for t in range(table.n_trials)) + ",mean"
    lines = [header]
    for i in range(table.n_examples):
        cells = [str(int(table.example_ids[i]))]
        cells += [_fmt(v) for v in table.trials[:, i]]
        cells.append(_fmt(table.mean[i]))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(table: ScoreTable, path) -> None:
    Path(path).write_text(to_csv(table))
