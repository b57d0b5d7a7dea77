"""Dataset-pruning score engine and experiment harness.

Computes per-example importance scores (GraNd, EL2N, input norm, forgetting
counts, random) over a small self-contained feedforward classifier, validates
the gradient-norm score against a closed-form linear-softmax identity, and
drives correlation and pruning-sweep experiments from a CLI.
"""

from prunekit._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
