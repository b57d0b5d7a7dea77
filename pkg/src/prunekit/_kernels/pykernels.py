"""NumPy reference implementations of the per-example kernels.

Layer weights are (fan_out, fan_in) C-contiguous float64 arrays; a bias entry
of None marks a bias-free layer. The activation applies to hidden layers only.
"""

import numpy as np

BACKEND = "python"


def _softmax1(z):
    z = z - z.max()  # shift so exp cannot overflow
    e = np.exp(z)
    return e / e.sum()


def forward_one(weights, biases, relu, x):
    """One example through the stack.

    Returns (hs, logits, probs) where hs[l] is the input vector of layer l
    (hs[0] is x itself, later entries are post-activation).
    """
    hs = [x]
    h = x
    last = len(weights) - 1
    logits = None
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = w @ h
        if b is not None:
            z = z + b
        if l < last:
            h = np.maximum(z, 0.0) if relu else z
            hs.append(h)
        else:
            logits = z
    return hs, logits, _softmax1(logits)


def backward_one(weights, biases, relu, x, y):
    """Exact gradient of cross-entropy(softmax(stack(x)), y) for one example.

    Returns (gws, gbs) shaped like (weights, biases); gbs entries are None
    where the layer has no bias.
    """
    hs, _, probs = forward_one(weights, biases, relu, x)
    delta = probs.copy()
    delta[y] -= 1.0
    n_layers = len(weights)
    gws = [None] * n_layers
    gbs = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        h = hs[l]
        gws[l] = np.outer(delta, h)
        gbs[l] = delta.copy() if biases[l] is not None else None
        if l > 0:
            delta = weights[l].T @ delta
            if relu:
                delta = np.where(h > 0, delta, 0.0)
    return gws, gbs


def grand_norm_one(weights, biases, relu, x, y):
    """Euclidean norm of the full per-example gradient vector."""
    gws, gbs = backward_one(weights, biases, relu, x, y)
    total = 0.0
    for gw, gb in zip(gws, gbs):
        flat = gw.ravel()
        total += float(np.dot(flat, flat))
        if gb is not None:
            total += float(np.dot(gb, gb))
    return float(np.sqrt(total))
