"""Minibatch SGD training with epoch checkpoints and per-example correctness tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from prunekit import checkpoint
from prunekit.data import Dataset
from prunekit.nn import ModelSpec, Params, batch_mean_gradient, forward_batch, init_params


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one run.

    checkpoint_epochs are the epoch indices to persist; index 0 means the
    initialization, saved before any gradient step.
    """

    epochs: int
    batch_size: int
    learning_rate: float
    momentum: float = 0.9
    seed: int = 0
    checkpoint_epochs: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "checkpoint_epochs", frozenset(int(e) for e in self.checkpoint_epochs))
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        bad = [e for e in self.checkpoint_epochs if not 0 <= e <= self.epochs]
        if bad:
            raise ValueError(f"checkpoint epochs {sorted(bad)} outside 0..{self.epochs}")


@dataclass
class TrainResult:
    final_params: Params
    test_accuracy: float
    correctness: np.ndarray  # (n_examples, epochs) of 0/1, sampled at epoch end
    checkpoints_written: list[int]


def _predictions(params: Params, xs: np.ndarray) -> np.ndarray:
    _, probs = forward_batch(params, xs)
    # np.argmax resolves ties toward the lowest class index, as required.
    return np.argmax(probs, axis=1)


def evaluate(params: Params, ds: Dataset) -> float:
    """Fraction of examples whose argmax prediction matches the label."""
    if ds.input_dim != params.weights[0].shape[1]:
        raise ValueError(f"dataset dim {ds.input_dim} != model input {params.weights[0].shape[1]}")
    return float(np.mean(_predictions(params, ds.xs) == ds.ys))


def shuffle_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Example visit order for one epoch; a pure function of (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def _check_dims(spec: ModelSpec, ds: Dataset, what: str) -> None:
    if ds.input_dim != spec.input_dim:
        raise ValueError(f"{what} input dim {ds.input_dim} != spec {spec.input_dim}")
    if ds.num_classes != spec.num_classes:
        raise ValueError(f"{what} classes {ds.num_classes} != spec {spec.num_classes}")


def train(
    spec: ModelSpec,
    train_ds: Dataset,
    test_ds: Dataset,
    cfg: TrainConfig,
    ckpt_dir=None,
) -> TrainResult:
    """Run momentum SGD; deterministic end to end for fixed inputs.

    Updates follow v <- momentum*v - lr*g, theta <- theta + v with
    minibatch-mean gradients. The correctness row for an epoch is sampled
    after its last update, with the then-current parameters.
    """
    _check_dims(spec, train_ds, "train set")
    _check_dims(spec, test_ds, "test set")
    if cfg.checkpoint_epochs and ckpt_dir is None:
        raise ValueError("checkpoint epochs requested but no checkpoint directory given")

    params = init_params(spec, cfg.seed)
    if 0 in cfg.checkpoint_epochs:
        checkpoint.save(ckpt_dir, 0, params)

    velocity = params.zeros_like()
    xs, ys = train_ds.xs, train_ds.ys
    n = len(train_ds)
    correctness = np.zeros((n, cfg.epochs), dtype=np.uint8)

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_order(cfg.seed, epoch, n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grad = batch_mean_gradient(params, xs[idx], ys[idx])
            for w, v, g in zip(params.weights, velocity.weights, grad.weights):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                w += v
            for b, v, g in zip(params.biases, velocity.biases, grad.biases):
                if b is not None:
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g
                    b += v
        params.assert_finite()
        correctness[:, epoch - 1] = _predictions(params, xs) == ys
        if epoch in cfg.checkpoint_epochs:
            checkpoint.save(ckpt_dir, epoch, params)

    return TrainResult(
        final_params=params,
        test_accuracy=evaluate(params, test_ds),
        correctness=correctness,
        checkpoints_written=sorted(cfg.checkpoint_epochs),
    )


def forget_counts(correctness: np.ndarray) -> np.ndarray:
    """Forgetting events per example: count of correct->incorrect transitions
    between consecutive epochs. Examples never correct in any epoch get the
    sentinel count epochs + 1."""
    c = np.asarray(correctness)
    if c.ndim != 2 or c.shape[1] < 1:
        raise ValueError("correctness matrix must be 2-D with at least one epoch column")
    counts = np.sum((c[:, :-1] == 1) & (c[:, 1:] == 0), axis=1).astype(np.int64)
    never_correct = ~np.any(c != 0, axis=1)
    counts[never_correct] = c.shape[1] + 1
    return counts
