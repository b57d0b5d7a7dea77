"""Closed-form gradient-norm identity for bias-free linear softmax classifiers.

For f(x) = softmax(W x) with cross-entropy loss, the full gradient norm
factorizes as sqrt(sum_j (p_j - 1{j=y})^2) * ||x||_2. This module computes
that closed form directly; it is the independent oracle the backprop-based
gradient-norm score is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prunekit.nn import softmax


@dataclass(frozen=True)
class LinearModel:
    """Bias-free linear softmax classifier: W has shape (num_classes, dim)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.ndim != 2:
            raise ValueError(f"W must be 2-D, got shape {w.shape}")
        if w.shape[0] < 2 or w.shape[1] < 1:
            raise ValueError(f"W needs >= 2 classes and >= 1 input dim, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("W has non-finite entries")

    @property
    def num_classes(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]


def _residual_factor(model: LinearModel, x: np.ndarray, y: int) -> float:
    probs = softmax(model.w @ x)
    probs[y] -= 1.0
    return float(np.sqrt(np.dot(probs, probs)))


def _check_example(model: LinearModel, x, y) -> tuple[np.ndarray, int]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise ValueError(f"input has shape {x.shape}, expected ({model.dim},)")
    y = int(y)
    if not 0 <= y < model.num_classes:
        raise ValueError(f"label {y} out of range for {model.num_classes} classes")
    return x, y


def closed_form_grad_norm(model: LinearModel, x, y) -> float:
    """sqrt(sum_j (p_j - 1{j=y})^2) * ||x||_2 with p = softmax(Wx)."""
    x, y = _check_example(model, x, y)
    return _residual_factor(model, x, y) * float(np.linalg.norm(x))


def expected_grad_norm_factor(model_draws, x, y) -> float:
    """Sample mean over weight draws of the residual factor sqrt(sum_j (p_j - 1{j=y})^2).

    Multiplying by ||x||_2 gives the sample-mean gradient norm for the same
    draws, so the x-dependence of the expected score is carried entirely by
    the input norm.
    """
    draws = list(model_draws)
    if not draws:
        raise ValueError("need at least one model draw")
    x, y = _check_example(draws[0], x, y)
    factors = [_residual_factor(m, x, y) for m in draws]
    return float(np.mean(factors))
