"""
SDCK checkpoint format.

Layout (little-endian): magic "SDCK", u32 version, u32 header length, the
header as sorted-key UTF-8 JSON, then the raw array payloads back to back.
The header records the architecture tag, the subspace layout, the array
directory (name, dtype, shape, byte offset into the payload, byte count),
the Adam step counter and free-form metadata such as provenance.

Adam moments are stored as arrays named ``adam.m.<param>`` and
``adam.v.<param>``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from app.core.errors import CheckpointFormatError, ConfigurationError, MissingFileError
from app.core.logging import get_logger
from app.model.layout import SubspaceLayout
from app.model.networks import ARCH_ISA, ARCH_NO_ISA, SubspaceAutoencoder
from app.tensor.optim import AdamState
from app.tensor.tensor import Tensor, precision

logger = get_logger(__name__)

MAGIC = b"SDCK"
VERSION = 1
PREAMBLE = struct.Struct("<4sII")
_MOMENT_PREFIXES = ("adam.m.", "adam.v.")


@dataclass
class Checkpoint:
    """A loaded checkpoint: model, optimizer state and header metadata."""

    model: SubspaceAutoencoder
    optimizer: AdamState = field(default_factory=AdamState)
    metadata: dict[str, Any] = field(default_factory=dict)


def _little_endian(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))


def encode_checkpoint(
    model: SubspaceAutoencoder,
    optimizer: AdamState | None = None,
    metadata: dict[str, Any] | None = None,
) -> bytes:
    """Serialize model parameters (and optional Adam state) to SDCK bytes."""
    arrays: dict[str, np.ndarray] = {name: p.data for name, p in model.params.items()}
    if optimizer is not None:
        for name in model.params:
            if name in optimizer.m:
                arrays[f"adam.m.{name}"] = optimizer.m[name]
                arrays[f"adam.v.{name}"] = optimizer.v[name]

    directory = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        data = _little_endian(arrays[name])
        directory.append(
            {
                "name": name,
                "dtype": data.dtype.str,
                "shape": list(data.shape),
                "offset": offset,
                "nbytes": int(data.nbytes),
            }
        )
        chunks.append(data.tobytes())
        offset += data.nbytes

    header = {
        "architecture": model.architecture,
        "layout": model.layout.to_dict(),
        "arrays": directory,
        "optimizer": {"step": optimizer.step if optimizer is not None else 0},
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return PREAMBLE.pack(MAGIC, VERSION, len(header_bytes)) + header_bytes + b"".join(chunks)


def decode_checkpoint(
    payload: bytes,
    expected_layout: SubspaceLayout | None = None,
    source: str = "<bytes>",
) -> Checkpoint:
    """
    Parse SDCK bytes back into a model.

    Raises:
        CheckpointFormatError: On bad magic/version, a malformed header,
            truncated payloads, missing arrays, shape mismatches, or a layout
            different from ``expected_layout``
    """
    if len(payload) < PREAMBLE.size:
        raise CheckpointFormatError(f"{source}: truncated checkpoint preamble", path=source)
    magic, version, header_len = PREAMBLE.unpack_from(payload)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}", path=source)
    if version != VERSION:
        raise CheckpointFormatError(
            f"{source}: unsupported checkpoint version {version}, expected {VERSION}", path=source
        )
    body_start = PREAMBLE.size + header_len
    if len(payload) < body_start:
        raise CheckpointFormatError(f"{source}: truncated checkpoint header", path=source)
    try:
        header = json.loads(payload[PREAMBLE.size : body_start].decode("utf-8"))
        architecture = header["architecture"]
        layout = SubspaceLayout(tuple(header["layout"]["dims"]), tuple(header["layout"]["names"]))
        directory = header["arrays"]
    except (ValueError, KeyError, TypeError, ConfigurationError) as e:
        raise CheckpointFormatError(f"{source}: malformed checkpoint header ({e})", path=source) from e

    if architecture not in (ARCH_ISA, ARCH_NO_ISA):
        raise CheckpointFormatError(f"{source}: unknown architecture {architecture!r}", path=source)
    if expected_layout is not None and expected_layout != layout:
        raise CheckpointFormatError(
            f"{source}: checkpoint layout {list(layout.dims)} does not match "
            f"configured layout {list(expected_layout.dims)}",
            path=source,
        )

    body = memoryview(payload)[body_start:]
    arrays: dict[str, np.ndarray] = {}
    for entry in directory:
        name, offset, nbytes = entry["name"], int(entry["offset"]), int(entry["nbytes"])
        if offset + nbytes > len(body):
            raise CheckpointFormatError(f"{source}: array {name!r} is truncated", path=source)
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        if int(np.prod(shape, dtype=np.int64)) * dtype.itemsize != nbytes:
            raise CheckpointFormatError(f"{source}: array {name!r} size disagrees with its shape", path=source)
        arrays[name] = np.frombuffer(body[offset : offset + nbytes], dtype=dtype).reshape(shape).copy()

    isa_enabled = architecture == ARCH_ISA
    param_names = [n for n in arrays if not n.startswith(_MOMENT_PREFIXES)]
    param_dtypes = {arrays[n].dtype.newbyteorder("=") for n in param_names}
    dtype = param_dtypes.pop() if len(param_dtypes) == 1 else np.dtype(np.float32)

    try:
        with precision(dtype):
            params = {n: Tensor.parameter(arrays[n], name=n) for n in param_names}
            model = SubspaceAutoencoder(layout, params, isa_enabled=isa_enabled)
    except ConfigurationError as e:
        raise CheckpointFormatError(f"{source}: {e.message}", path=source) from e

    state = AdamState(step=int(header.get("optimizer", {}).get("step", 0)))
    for name in model.params:
        m, v = arrays.get(f"adam.m.{name}"), arrays.get(f"adam.v.{name}")
        if m is not None and v is not None:
            state.m[name] = m.astype(dtype)
            state.v[name] = v.astype(dtype)

    return Checkpoint(model=model, optimizer=state, metadata=header.get("metadata", {}))


def save_checkpoint(
    model: SubspaceAutoencoder,
    path: Path,
    optimizer: AdamState | None = None,
    metadata: dict[str, Any] | None = None,
) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(encode_checkpoint(model, optimizer, metadata))
    return out


def load_checkpoint(path: Path, expected_layout: SubspaceLayout | None = None) -> Checkpoint:
    """
    Load a checkpoint file.

    Raises:
        MissingFileError: If the file does not exist
        CheckpointFormatError: If the file is malformed or mismatches ``expected_layout``
    """
    src = Path(path)
    if not src.is_file():
        raise MissingFileError(f"Checkpoint not found: {src}", path=str(src))
    return decode_checkpoint(src.read_bytes(), expected_layout=expected_layout, source=str(src))
