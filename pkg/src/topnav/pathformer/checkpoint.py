"""Single-file checkpoints: magic, version, JSON manifest, then little-endian tensors.

The manifest lists every tensor's name, shape, dtype and byte offset into the
payload, plus the model config and any caller-supplied metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .model import PathFormer

MAGIC = b"TOPNAVCK"
VERSION = 1
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: PathFormer, extra: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, t in model.state_dict().items():
        arr = t.detach().cpu().numpy()
        kind = str(arr.dtype)
        if kind not in _DTYPES:
            raise CheckpointError(f"{name}: unsupported dtype {kind}")
        data = np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": kind, "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    manifest = {"config": model.config.to_dict(), "seed": model.config.seed, "tensors": entries, "extra": extra or {}}
    head = json.dumps(manifest, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(head)))
        f.write(head)
        for b in blobs:
            f.write(b)


def read_manifest(path) -> tuple[dict, bytes]:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    try:
        version, n = struct.unpack_from("<IQ", raw, pos)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header") from exc
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos += struct.calcsize("<IQ")
    try:
        manifest = json.loads(raw[pos: pos + n])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt manifest") from exc
    return manifest, raw[pos + n:]


def load_checkpoint(path, dtype=torch.float32) -> tuple[PathFormer, dict]:
    manifest, payload = read_manifest(path)
    config = ModelConfig.from_dict(manifest["config"])
    model = PathFormer(config)
    state = {}
    for e in manifest["tensors"]:
        chunk = payload[e["offset"]: e["offset"] + e["nbytes"]]
        if len(chunk) != e["nbytes"]:
            raise CheckpointError(f"{path}: tensor {e['name']} truncated")
        arr = np.frombuffer(chunk, dtype=_DTYPES[e["dtype"]]).reshape(e["shape"])
        state[e["name"]] = torch.from_numpy(arr.astype(e["dtype"]))
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise CheckpointError(f"{path}: missing {missing} unexpected {unexpected}")
    if dtype != torch.float32:
        model = model.to(dtype)
    model.eval()
    return model, manifest.get("extra", {})
