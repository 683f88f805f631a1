"""Binary tensor format and checkpoint directories.

Layout of a .lten file: magic "LTEN", format version u32, dtype code u8
(0 = float32), rank u8, dims as u64 little-endian, then the raw
little-endian payload. A checkpoint is a directory of named tensors plus a
JSON manifest.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "TensorFormatError",
    "save_tensor",
    "load_tensor",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_checksum",
    "file_sha256",
    "register_read_listener",
    "note_read",
]

MAGIC = b"LTEN"
FORMAT_VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4")}

_read_listeners: list[Callable[[str], None]] = []


def register_read_listener(fn: Callable[[str], None]):
    """Register a callback invoked with every artifact path read."""
    _read_listeners.append(fn)
    return fn


def unregister_read_listener(fn):
    if fn in _read_listeners:
        _read_listeners.remove(fn)


def note_read(path):
    for fn in _read_listeners:
        fn(str(path))


class TensorFormatError(IOError):
    """Bad magic, version mismatch, or truncated tensor file."""


def save_tensor(path, array: np.ndarray):
    arr = np.ascontiguousarray(array, dtype="<f4")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<BB", 0, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(arr.tobytes())


def load_tensor(path) -> np.ndarray:
    path = Path(path)
    note_read(path)
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 10 or raw[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != FORMAT_VERSION:
        raise TensorFormatError(f"{path}: unsupported format version {version}")
    dtype_code, rank = struct.unpack_from("<BB", raw, 8)
    if dtype_code not in _DTYPE_CODES:
        raise TensorFormatError(f"{path}: unknown dtype code {dtype_code}")
    header_end = 10 + 8 * rank
    if len(raw) < header_end:
        raise TensorFormatError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{rank}Q", raw, 10)
    dtype = _DTYPE_CODES[dtype_code]
    expected = header_end + int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if rank else header_end + dtype.itemsize
    if rank == 0:
        shape = ()
        expected = header_end + dtype.itemsize
    if len(raw) != expected:
        raise TensorFormatError(f"{path}: truncated payload ({len(raw)} bytes, expected {expected})")
    arr = np.frombuffer(raw[header_end:], dtype=dtype).reshape(shape)
    return arr.astype(np.float32, copy=True)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(ckpt_dir, tensors: dict[str, np.ndarray], meta: dict | None = None):
    """Write named tensors plus a manifest; names must be filesystem-safe."""
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name in sorted(tensors):
        if "/" in name or name.startswith("."):
            raise ValueError(f"invalid tensor name {name!r}")
        fname = f"{name}.lten"
        save_tensor(ckpt_dir / fname, tensors[name])
        entries[name] = {
            "file": fname,
            "shape": list(np.asarray(tensors[name]).shape),
            "sha256": file_sha256(ckpt_dir / fname),
        }
    manifest = {"format_version": FORMAT_VERSION, "tensors": entries, "meta": meta or {}}
    with open(ckpt_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_checkpoint(ckpt_dir) -> tuple[dict[str, np.ndarray], dict]:
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / "manifest.json"
    note_read(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise TensorFormatError(f"{ckpt_dir}: unsupported checkpoint version")
    tensors = {name: load_tensor(ckpt_dir / entry["file"]) for name, entry in manifest["tensors"].items()}
    return tensors, manifest.get("meta", {})


def checkpoint_checksum(ckpt_dir) -> str:
    """Order-independent digest over all tensor payloads in a checkpoint."""
    ckpt_dir = Path(ckpt_dir)
    with open(ckpt_dir / "manifest.json") as f:
        manifest = json.load(f)
    h = hashlib.sha256()
    for name in sorted(manifest["tensors"]):
        h.update(name.encode())
        h.update(file_sha256(ckpt_dir / manifest["tensors"][name]["file"]).encode())
    return h.hexdigest()
