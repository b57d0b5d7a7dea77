"""Step-addressed checkpoint persistence for model parameters.

Binary layout (little-endian): magic "DDCK", u32 format version, u64 step,
then per tensor: u16 name length, name bytes, u8 rank, u32 dims, float64
payload; the file ends with a u32 CRC32 of everything before it.

Restore semantics: a step argument that IS provided - including step 0 - is
loaded exactly or fails. Only an absent step falls back to the latest
checkpoint. The distinction is deliberately an "is a value provided" check:
a truthiness test here silently turns "restore initialization" into
"restore latest", which corrupts every score computed at step 0.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from prunekit.nn import Params

MAGIC = b"DDCK"
FORMAT_VERSION = 1

_STEP_FILE = re.compile(r"^ckpt_(\d+)\.bin$")
_TENSOR_NAME = re.compile(r"^layer(\d+)/(weight|bias)$")


class CheckpointError(Exception):
    pass


class DuplicateStepError(CheckpointError):
    pass


class StepNotFoundError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


def _encode(step: int, params: Params) -> bytes:
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", step)]
    for name, arr in params.named_tensors():
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def step_path(dir, step: int) -> Path:
    return Path(dir) / f"ckpt_{step}.bin"


def save(dir, step: int, params: Params) -> None:
    """Atomically persist params as ckpt_<step>.bin; an existing step is an error."""
    step = int(step)
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    params.assert_finite()
    directory = Path(dir)
    directory.mkdir(parents=True, exist_ok=True)
    final = step_path(directory, step)
    blob = _encode(step, params)
    fd, tmp_name = tempfile.mkstemp(prefix=f".ckpt_{step}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        # Hard-link publish: atomic, and fails (instead of overwriting) when
        # another writer already published this step.
        try:
            os.link(tmp_name, final)
        except FileExistsError:
            raise DuplicateStepError(f"duplicate step {step} in {directory}") from None
    finally:
        os.unlink(tmp_name)


def list_steps(dir) -> list[int]:
    """Ascending step numbers parsed from ckpt_<step>.bin filenames."""
    steps = []
    for name in os.listdir(dir):
        m = _STEP_FILE.match(name)
        if m:
            steps.append(int(m.group(1)))
    return sorted(steps)


def restore(dir, step: int | None = None, activation: str = "relu") -> Params:
    """Load one checkpoint from a store directory.

    step present (0 counts as present): load exactly that step or raise
    StepNotFoundError. step absent: load the highest-numbered step.
    """
    directory = Path(dir)
    # Presence check, never truthiness: step 0 must mean "exactly step 0".
    if step is not None:
        step = int(step)
        path = step_path(directory, step)
        if not path.exists():
            raise StepNotFoundError(f"step {step} not found in {directory}")
    else:
        steps = list_steps(directory)
        if not steps:
            raise StepNotFoundError(f"no checkpoints in {directory}")
        step = steps[-1]
        path = step_path(directory, step)
    params, stored_step = _decode(path.read_bytes(), path, activation)
    if stored_step != step:
        raise CorruptCheckpointError(
            f"{path}: header step {stored_step} disagrees with filename step {step}"
        )
    return params


def _decode(blob: bytes, path, activation: str) -> tuple[Params, int]:
    if len(blob) < len(MAGIC) + 4 + 8 + 4:
        raise CorruptCheckpointError(f"{path}: truncated checkpoint")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CorruptCheckpointError(f"{path}: checksum mismatch")
    if body[:4] != MAGIC:
        raise CorruptCheckpointError(f"{path}: bad magic {body[:4]!r}")
    version = struct.unpack("<I", body[4:8])[0]
    if version != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{path}: unsupported format version {version}")
    step = struct.unpack("<Q", body[8:16])[0]
    tensors: dict[str, np.ndarray] = {}
    offset = 16
    end = len(body)
    while offset < end:
        try:
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            name = body[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", body, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", body, offset)
            offset += 4 * rank
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            nbytes = 8 * count
            if offset + nbytes > end:
                raise CorruptCheckpointError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(body, dtype="<f8", count=count, offset=offset)
            offset += nbytes
            tensors[name] = arr.reshape(dims).copy()
        except struct.error:
            raise CorruptCheckpointError(f"{path}: truncated tensor record") from None
    return _tensors_to_params(tensors, path, activation), int(step)


def _tensors_to_params(tensors, path, activation: str) -> Params:
    layers: dict[int, dict[str, np.ndarray]] = {}
    for name, arr in tensors.items():
        m = _TENSOR_NAME.match(name)
        if not m:
            raise CorruptCheckpointError(f"{path}: unexpected tensor name {name!r}")
        layers.setdefault(int(m.group(1)), {})[m.group(2)] = arr
    if not layers or sorted(layers) != list(range(len(layers))):
        raise CorruptCheckpointError(f"{path}: layer indices not contiguous from 0")
    weights: list[np.ndarray] = []
    biases: list[np.ndarray | None] = []
    for l in range(len(layers)):
        entry = layers[l]
        if "weight" not in entry or entry["weight"].ndim != 2:
            raise CorruptCheckpointError(f"{path}: layer {l} is missing a 2-D weight")
        weights.append(entry["weight"])
        bias = entry.get("bias")
        if bias is not None and bias.shape != (entry["weight"].shape[0],):
            raise CorruptCheckpointError(f"{path}: layer {l} bias shape {bias.shape}")
        biases.append(bias)
    params = Params(weights, biases, activation=activation)
    params.assert_finite()
    return params
