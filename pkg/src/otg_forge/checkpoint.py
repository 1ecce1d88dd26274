"""Versioned single-file binary container for trained models.

Layout::

    b"OTGFORGE"                8-byte magic
    uint32 LE                  format version
    uint64 LE                  header length in bytes
    header                     UTF-8 JSON (sorted keys): kind, vocabularies,
                               hyperparams, seed, extra, tensors[{name, shape}]
    tensor payloads            float32 LE, concatenated in header order
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from otg_forge.errors import CheckpointError

MAGIC = b"OTGFORGE"
FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")


def state_to_arrays(state: Mapping[str, torch.Tensor]) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().astype(_LE_F32) for k, v in state.items()}


def write_checkpoint(path: str | Path, *, kind: str, tensors: Mapping[str, np.ndarray], **meta) -> None:
    header = dict(meta)
    header["kind"] = kind
    header["tensors"] = [{"name": name, "shape": list(arr.shape)} for name, arr in tensors.items()]
    raw = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(raw)))
        fh.write(raw)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype=_LE_F32).tobytes())


def read_checkpoint(path: str | Path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    off = 8 + struct.calcsize("<IQ")
    header = json.loads(data[off : off + hlen].decode("utf-8"))
    off += hlen
    if kind is not None and header.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {header.get('kind')}")
    tensors = {}
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = count * 4
        if off + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated tensor {spec['name']}")
        tensors[spec["name"]] = np.frombuffer(data, dtype=_LE_F32, count=count, offset=off).reshape(spec["shape"]).copy()
        off += nbytes
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return header, tensors


def parameter_checksum(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, t in module.state_dict().items():
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
