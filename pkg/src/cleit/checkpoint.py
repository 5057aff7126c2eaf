"""Checkpoint persistence.

Wire format: one raw binary file per named parameter containing
little-endian float32 values in row-major order, indexed by a JSON
manifest that records name, shape, file, byte offset and a CRC32
checksum, plus an optional model-topology block and freeze flags.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .errors import DataError
from .tensor import Tensor

MANIFEST_NAME = "manifest.json"
FORMAT_TAG = "cleit-checkpoint-v1"


def _to_array(p) -> np.ndarray:
    return p.data if isinstance(p, Tensor) else np.asarray(p)


def save_checkpoint(
    directory,
    params: dict,
    topology: dict | None = None,
    freeze_flags: dict | None = None,
) -> Path:
    """Write parameters and manifest into ``directory``; returns the
    manifest path. Values are stored as float32 regardless of the
    in-memory dtype."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in sorted(params):
        arr = np.ascontiguousarray(_to_array(params[name]), dtype="<f4")
        raw = arr.tobytes()
        fname = f"{name}.bin"
        (directory / fname).write_bytes(raw)
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "file": fname,
                "byte_offset": 0,
                "checksum": f"{zlib.crc32(raw):08x}",
            }
        )
    manifest = {"format": FORMAT_TAG, "params": entries}
    if topology is not None:
        manifest["topology"] = topology
    if freeze_flags is not None:
        manifest["freeze"] = freeze_flags
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path


def read_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise DataError(f"no checkpoint manifest at {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != FORMAT_TAG:
        raise DataError(f"unsupported checkpoint format {manifest.get('format')!r}")
    return manifest


def load_checkpoint(directory) -> tuple[dict[str, np.ndarray], dict]:
    """Read all parameters (as float32 arrays) plus the manifest,
    verifying checksums and shapes."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    out: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        raw = (directory / entry["file"]).read_bytes()
        off = entry.get("byte_offset", 0)
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        blob = raw[off : off + nbytes]
        if f"{zlib.crc32(blob):08x}" != entry["checksum"]:
            raise DataError(f"checksum mismatch for parameter {entry['name']!r}")
        arr = np.frombuffer(blob, dtype="<f4").reshape(shape).copy()
        out[entry["name"]] = arr
    return out, manifest


def load_into(directory, params: dict[str, Tensor]) -> dict:
    """Restore stored values into existing parameter tensors in place
    (cast to each tensor's dtype); returns the manifest."""
    stored, manifest = load_checkpoint(directory)
    missing = set(params) - set(stored)
    if missing:
        raise DataError(f"checkpoint is missing parameters: {sorted(missing)[:5]}")
    for name, tensor in params.items():
        arr = stored[name]
        if arr.shape != tensor.shape:
            raise DataError(f"shape mismatch for {name!r}: {arr.shape} vs {tensor.shape}")
        tensor.data = arr.astype(tensor.dtype, copy=False)
        tensor.grad = None
    return manifest


def checkpoint_exists(directory) -> bool:
    return (Path(directory) / MANIFEST_NAME).exists()
