"""Manifest-plus-raw-tensor container used for datasets and checkpoints.

A container is a directory with manifest.json and one raw little-endian
binary file per tensor. The manifest records shapes, dtypes and per-file
SHA-256 digests plus a digest of itself, so any bit flip in either the
tensors or the manifest is detected at load time.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


class CorruptDatasetError(RuntimeError):
    """Container contents do not match their manifest."""


_MANIFEST = "manifest.json"
_SELF_HASH_KEY = "manifest_sha256"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_container(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Write tensors (dtype preserved, forced little-endian) and metadata."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<")
        blob = arr.astype(dt, copy=False).tobytes()
        fname = f"{name}.bin"
        (path / fname).write_bytes(blob)
        entries[name] = {
            "file": fname,
            "dtype": dt.str,
            "shape": list(arr.shape),
            "sha256": _sha256(blob),
        }
    manifest = {"tensors": entries, "meta": meta}
    body = json.dumps(manifest, sort_keys=True, indent=1)
    manifest[_SELF_HASH_KEY] = _sha256(body.encode())
    (path / _MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=1))


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    """Load tensors and metadata, refusing on any digest mismatch."""
    path = Path(path)
    mpath = path / _MANIFEST
    if not mpath.exists():
        raise CorruptDatasetError(f"no manifest in {path}")
    manifest = json.loads(mpath.read_text())
    recorded = manifest.pop(_SELF_HASH_KEY, None)
    body = json.dumps(manifest, sort_keys=True, indent=1)
    if recorded != _sha256(body.encode()):
        raise CorruptDatasetError("manifest digest mismatch")
    tensors = {}
    for name, entry in manifest["tensors"].items():
        blob = (path / entry["file"]).read_bytes()
        if _sha256(blob) != entry["sha256"]:
            raise CorruptDatasetError(f"tensor file {entry['file']} digest mismatch")
        arr = np.frombuffer(blob, dtype=np.dtype(entry["dtype"]))
        tensors[name] = arr.reshape(entry["shape"]).copy()
    return tensors, manifest["meta"]
