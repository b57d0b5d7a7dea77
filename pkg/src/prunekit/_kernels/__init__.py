"""Per-example forward/backward kernels with a compiled fast path.

The compiled Cython backend is preferred when the extension was built; the
NumPy backend implements identical contracts and is selected automatically
when it was not. Set PRUNEKIT_BACKEND=python|cython to force a choice
(``cython`` raises if the extension is missing).
"""

import os

_requested = os.environ.get("PRUNEKIT_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise RuntimeError(f"PRUNEKIT_BACKEND must be auto, cython or python, got {_requested!r}")

if _requested == "python":
    from prunekit._kernels import pykernels as _impl
else:
    try:
        from prunekit._kernels import cykernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "cython":
            raise
        from prunekit._kernels import pykernels as _impl

BACKEND = _impl.BACKEND
forward_one = _impl.forward_one
backward_one = _impl.backward_one
grand_norm_one = _impl.grand_norm_one


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from prunekit._kernels import cykernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names
