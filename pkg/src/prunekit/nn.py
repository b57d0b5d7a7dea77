"""Feedforward classifier core: parameters, forward pass, exact per-example gradients.

Everything is float64. Weight matrices are (fan_out, fan_in) C-contiguous
arrays so that layer l maps h -> W_l h + b_l; a bias of None marks a
bias-free layer (used by the linear-softmax comparison configuration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from prunekit import _kernels

ACTIVATIONS = ("relu", "identity")
INITS = ("he_normal", "glorot_uniform")

# Predicted probabilities are clamped at this floor before taking the log so
# a confident wrong prediction cannot produce an infinite loss.
LOG_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description: widths [input_dim, hidden..., num_classes]."""

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    init: str = "he_normal"
    bias: bool = True

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("layer_widths needs at least an input and an output width")
        if any(w < 1 for w in widths):
            raise ValueError(f"all layer widths must be >= 1, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]


@dataclass
class Params:
    """Weights and biases of one model instance.

    weights[l] has shape (fan_out, fan_in); biases[l] has shape (fan_out,)
    or is None for a bias-free layer. The activation tag travels with the
    parameters so forward/backward need no extra context.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray | None]
    activation: str = "relu"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases if b is not None)

    def copy(self) -> "Params":
        return Params(
            [w.copy() for w in self.weights],
            [None if b is None else b.copy() for b in self.biases],
            self.activation,
        )

    def zeros_like(self) -> "Params":
        return Params(
            [np.zeros_like(w) for w in self.weights],
            [None if b is None else np.zeros_like(b) for b in self.biases],
            self.activation,
        )

    def named_tensors(self):
        """(name, array) pairs in a stable order, bias-free layers skipped."""
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"layer{l}/weight", w
            if b is not None:
                yield f"layer{l}/bias", b

    def assert_finite(self):
        for name, t in self.named_tensors():
            if not np.all(np.isfinite(t)):
                raise ValueError(f"non-finite values in {name}")

    def allclose(self, other: "Params", rtol=0.0, atol=0.0) -> bool:
        if self.n_layers != other.n_layers:
            return False
        for (na, a), (nb, b) in zip(self.named_tensors(), other.named_tensors()):
            if na != nb or a.shape != b.shape:
                return False
            if not np.allclose(a, b, rtol=rtol, atol=atol):
                return False
        return True


def init_params(spec: ModelSpec, seed: int) -> Params:
    """Deterministically initialize parameters for (spec, seed).

    he_normal draws weights from Normal(0, sqrt(2/fan_in)); glorot_uniform
    from Uniform(+-sqrt(6/(fan_in+fan_out))). Biases start at zero.
    """
    rng = np.random.default_rng(seed)
    weights: list[np.ndarray] = []
    biases: list[np.ndarray | None] = []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        if spec.init == "he_normal":
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        else:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        weights.append(np.ascontiguousarray(w))
        biases.append(np.zeros(fan_out) if spec.bias else None)
    return Params(weights, biases, activation=spec.activation)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (works for 1-D and 2-D inputs)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(params: Params, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    want = params.weights[0].shape[1]
    if x.ndim != 1 or x.shape[0] != want:
        raise ValueError(f"input has shape {x.shape}, expected ({want},)")
    return x


def _check_label(params: Params, y) -> int:
    y = int(y)
    n_classes = params.weights[-1].shape[0]
    if not 0 <= y < n_classes:
        raise ValueError(f"label {y} out of range for {n_classes} classes")
    return y


def forward(params: Params, x) -> tuple[np.ndarray, np.ndarray]:
    """Single-example pass; returns (logits, probs) with probs = softmax(logits)."""
    x = _check_input(params, x)
    _, logits, probs = _kernels.forward_one(
        params.weights, params.biases, params.activation == "relu", x
    )
    return logits, probs


def cross_entropy(probs, y) -> float:
    """-log probs[y], with probs[y] clamped at LOG_PROB_FLOOR."""
    probs = np.asarray(probs, dtype=np.float64)
    y = int(y)
    if not 0 <= y < probs.shape[-1]:
        raise ValueError(f"label {y} out of range for {probs.shape[-1]} classes")
    return -math.log(max(float(probs[y]), LOG_PROB_FLOOR))


def backward_per_example(params: Params, x, y) -> Params:
    """Exact analytic gradient of cross_entropy(forward(params, x), y).

    The result is a Params-shaped structure: one gradient array per weight
    and per bias (None where the layer is bias-free).
    """
    x = _check_input(params, x)
    y = _check_label(params, y)
    gws, gbs = _kernels.backward_one(
        params.weights, params.biases, params.activation == "relu", x, y
    )
    return Params(gws, gbs, activation=params.activation)


def flat_l2_norm(grad: Params) -> float:
    """Euclidean norm of all weight and bias entries concatenated."""
    total = 0.0
    for w in grad.weights:
        flat = w.ravel()
        total += float(np.dot(flat, flat))
    for b in grad.biases:
        if b is not None:
            total += float(np.dot(b, b))
    return math.sqrt(total)


def forward_batch(params: Params, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(n, d) inputs -> (logits, probs), both (n, num_classes).

    Batched path used by training and evaluation; BLAS-backed in every
    kernel backend.
    """
    hs, logits, probs = _forward_batch_hidden(params, xs)
    return logits, probs


def _forward_batch_hidden(params: Params, xs: np.ndarray):
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"batch has shape {xs.shape}, expected (n, {params.weights[0].shape[1]})"
        )
    relu = params.activation == "relu"
    hs = [xs]
    last = params.n_layers - 1
    h = xs
    logits = None
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T
        if b is not None:
            z += b
        if l < last:
            h = np.maximum(z, 0.0) if relu else z
            hs.append(h)
        else:
            logits = z
    return hs, logits, softmax(logits)


def batch_mean_gradient(params: Params, xs: np.ndarray, ys: np.ndarray) -> Params:
    """Mean over the batch of the exact per-example gradients."""
    hs, _, probs = _forward_batch_hidden(params, xs)
    n = xs.shape[0]
    relu = params.activation == "relu"
    delta = probs
    delta[np.arange(n), ys] -= 1.0
    delta /= n
    n_layers = params.n_layers
    gws: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gbs: list[np.ndarray | None] = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        h = hs[l]
        gws[l] = delta.T @ h
        if params.biases[l] is not None:
            gbs[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ params.weights[l]
            if relu:
                delta = np.where(h > 0, delta, 0.0)
    return Params(gws, gbs, activation=params.activation)
