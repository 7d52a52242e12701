"""Checkpoint files.

Layout: ``b"PDCF"``, u32 version, u32 header length, UTF-8 JSON header, then
the payload of little-endian float32 tensors at the offsets listed in the
header manifest. All integers are little-endian.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigMismatch, ShapeMismatch, TruncatedPayload, VersionMismatch
from .network import NetworkConfig, PDCFNet

MAGIC = b"PDCF"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


def encode(config: NetworkConfig, state: dict[str, np.ndarray]) -> bytes:
    manifest = []
    chunks = []
    offset = 0
    for name, arr in state.items():
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": "float32", "offset": offset})
        chunks.append(blob)
        offset += len(blob)
    header = json.dumps({"config": config.to_dict(), "manifest": manifest, "payload_bytes": offset},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + b"".join(chunks)


def decode(blob: bytes) -> tuple[NetworkConfig, dict[str, np.ndarray]]:
    if len(blob) < _PREFIX.size:
        raise TruncatedPayload("truncated header")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; not a checkpoint")
    if version != VERSION:
        raise VersionMismatch(f"version mismatch: file has {version}, reader supports {VERSION}")
    start = _PREFIX.size + hlen
    if len(blob) < start:
        raise TruncatedPayload("truncated header")
    header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
    payload = blob[start:]
    expected = header["payload_bytes"]
    if len(payload) < expected:
        raise TruncatedPayload(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise CheckpointError(f"trailing data: payload is {len(payload)} bytes, manifest covers {expected}")
    config = NetworkConfig.from_dict(header["config"])

    state: dict[str, np.ndarray] = {}
    cursor = 0
    for entry in sorted(header["manifest"], key=lambda e: e["offset"]):
        if entry["dtype"] != "float32":
            raise CheckpointError(f"{entry['name']}: unsupported dtype {entry['dtype']}")
        count = int(np.prod(entry["shape"], dtype=np.int64))
        if entry["offset"] != cursor:
            raise CheckpointError(f"manifest gap or overlap at {entry['name']} (offset {entry['offset']}, expected {cursor})")
        end = cursor + 4 * count
        state[entry["name"]] = np.frombuffer(payload[cursor:end], dtype="<f4").reshape(entry["shape"]).copy()
        cursor = end
    if cursor != expected:
        raise CheckpointError(f"manifest covers {cursor} bytes but payload has {expected}")
    return config, state


def save(path: str | os.PathLike, model: PDCFNet) -> None:
    """Write atomically (temp file in the same directory, then rename)."""
    path = Path(path)
    blob = encode(model.config, model.state_dict())
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path: str | os.PathLike, expected: NetworkConfig | None = None, dtype=np.float32) -> PDCFNet:
    """Rebuild a model from a checkpoint, validating shapes against its config."""
    config, state = decode(Path(path).read_bytes())
    if expected is not None and expected != config:
        raise ConfigMismatch(f"checkpoint config {config.digest()} does not match expected {expected.digest()}")
    model = PDCFNet(config, dtype=dtype)
    own = dict(model.named_parameters())
    if set(own) != set(state):
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        raise ShapeMismatch(f"tensor names disagree with config {config.digest()}: missing {missing}, unexpected {extra}")
    for name, p in own.items():
        if tuple(state[name].shape) != p.shape:
            raise ShapeMismatch(f"{name}: stored shape {tuple(state[name].shape)} but config "
                                f"{config.digest()} implies {p.shape}")
    model.load_state_dict(state)
    return model
