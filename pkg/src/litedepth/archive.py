"""Weight archive format: a small JSON header plus raw float32 payload.

Layout of a ``.ldw`` file:

    line 1: ``LITEDEPTH-WEIGHTS 1\n``       (ascii magic + format version)
    line 2: ``<header_bytes>\n``            (decimal length of the header)
    header: UTF-8 JSON, exactly header_bytes long
    payload: the concatenated tensors, little-endian float32, C order

The header records the variant, activation, and one entry per tensor
with its name, shape, byte offset into the payload and CRC32.  Loading
verifies every checksum and that the tensor set matches the target
model exactly, raising a distinct error for each failure mode.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .errors import (
    ArchiveError,
    ChecksumError,
    ExtraTensorError,
    MissingTensorError,
    VariantMismatchError,
)
from .model import DepthNet

__all__ = ["save_weights", "load_weights", "read_header", "MAGIC", "FORMAT_VERSION"]

MAGIC = "LITEDEPTH-WEIGHTS"
FORMAT_VERSION = 1


def save_weights(model: DepthNet, path) -> None:
    """Serialize a model's weight map to ``path``."""
    path = Path(path)
    tensors = []
    chunks = []
    offset = 0
    for name in sorted(model.weights):
        arr = np.ascontiguousarray(model.weights[name], dtype="<f4")
        raw = arr.tobytes()
        tensors.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": offset,
                "crc32": zlib.crc32(raw) & 0xFFFFFFFF,
            }
        )
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "variant": model.config.variant,
            "activation": model.config.activation,
            "tensors": tensors,
        },
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as f:
        f.write(f"{MAGIC} {FORMAT_VERSION}\n".encode())
        f.write(f"{len(header)}\n".encode())
        f.write(header)
        for raw in chunks:
            f.write(raw)


def read_header(path) -> dict:
    """Parse and validate the magic and JSON header; returns the header."""
    with open(path, "rb") as f:
        magic = f.readline()
        try:
            tag, version = magic.decode().split()
        except (UnicodeDecodeError, ValueError):
            raise ArchiveError(f"{path}: not a weight archive (bad magic line)")
        if tag != MAGIC:
            raise ArchiveError(f"{path}: not a weight archive (bad magic line)")
        if int(version) != FORMAT_VERSION:
            raise ArchiveError(f"{path}: unsupported format version {version}")
        try:
            n = int(f.readline())
            header = json.loads(f.read(n).decode())
        except (ValueError, UnicodeDecodeError) as exc:
            raise ArchiveError(f"{path}: corrupt header ({exc})")
    for key in ("format_version", "variant", "activation", "tensors"):
        if key not in header:
            raise ArchiveError(f"{path}: header missing field {key!r}")
    return header


def load_weights(model: DepthNet, path) -> None:
    """Load an archive into ``model`` in place, verifying everything.

    Raises VariantMismatchError if the archive was saved for another
    variant, MissingTensorError / ExtraTensorError when the tensor sets
    disagree, and ChecksumError on payload corruption.
    """
    path = Path(path)
    header = read_header(path)
    if header["variant"] != model.config.variant:
        raise VariantMismatchError(
            f"{path}: archive is for variant {header['variant']!r}, "
            f"model is {model.config.variant!r}"
        )
    by_name = {t["name"]: t for t in header["tensors"]}
    expected = set(model.weights)
    missing = sorted(expected - set(by_name))
    if missing:
        raise MissingTensorError(f"{path}: archive lacks {len(missing)} tensors, e.g. {missing[:3]}")
    extra = sorted(set(by_name) - expected)
    if extra:
        raise ExtraTensorError(f"{path}: archive has {len(extra)} unknown tensors, e.g. {extra[:3]}")

    with open(path, "rb") as f:
        f.readline()
        n = int(f.readline())
        f.read(n)
        payload_start = f.tell()
        loaded = {}
        for name in sorted(by_name):
            entry = by_name[name]
            shape = tuple(entry["shape"])
            want = model.weights[name].shape
            if shape != want:
                raise ArchiveError(f"{path}: tensor {name} has shape {shape}, expected {want}")
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            f.seek(payload_start + entry["offset"])
            raw = f.read(count * 4)
            if len(raw) != count * 4:
                raise ArchiveError(f"{path}: truncated payload at tensor {name}")
            if (zlib.crc32(raw) & 0xFFFFFFFF) != entry["crc32"]:
                raise ChecksumError(f"{path}: checksum mismatch for tensor {name}")
            loaded[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    model.weights.update(loaded)
