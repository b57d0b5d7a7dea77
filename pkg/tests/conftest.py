import os
from pathlib import Path

import pytest

MNIST_STEMS = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def mnist_paths() -> dict | None:
    d = Path(os.environ.get("DATA_DIR", "data"))
    found = {}
    for stem in MNIST_STEMS:
        for name in (stem, stem + ".gz"):
            if (d / name).exists():
                found[stem] = d / name
                break
        else:
            return None
    return found


def require_mnist() -> dict:
    files = mnist_paths()
    if files is None:
        pytest.skip("MNIST files not found under DATA_DIR (see README for the expected layout)")
    return files
