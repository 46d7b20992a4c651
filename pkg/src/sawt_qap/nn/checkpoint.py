"""Self-describing binary checkpoint format with integrity checking.

Layout (all integers little-endian):

    bytes 0-7    magic ``b"SAWTCKP1"``
    bytes 8-11   uint32 header length H
    bytes 12..   H bytes of UTF-8 JSON header
    ...          raw float32 payload, arrays concatenated in header order
    last 4       uint32 CRC32 of everything before the footer

The JSON header records the format version, a free-form ``meta`` dict, and an
ordered list of array descriptors ``{"name", "shape"}``.  Arrays are stored as
float32 regardless of in-memory dtype (parameters train in float32; optimizer
moments are downcast on save).  Any mismatch — bad magic, truncation, CRC
failure, or shape disagreement on load — raises :class:`CheckpointError`.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

__all__ = ["save_checkpoint", "load_checkpoint", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"SAWTCKP1"
FORMAT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write ``arrays`` (insertion order preserved) plus ``meta`` to ``path``."""
    entries = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps(
        {"version": FORMAT_VERSION, "meta": meta or {}, "arrays": entries},
        sort_keys=True,
    ).encode("utf-8")
    body = MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    Path(path).write_bytes(body + struct.pack("<I", crc))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; returns ``(arrays, meta)``.

    Raises:
        CheckpointError: On missing file, bad magic, truncation, CRC mismatch,
            unsupported version, or malformed header.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    if len(raw) < len(MAGIC) + 8:
        raise CheckpointError(f"checkpoint too short ({len(raw)} bytes): {path}")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic in {path}: {raw[:8]!r}")
    body, (stored_crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError(f"CRC mismatch in {path}: file is corrupt")
    (header_len,) = struct.unpack_from("<I", body, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if header_end > len(body):
        raise CheckpointError(f"truncated header in {path}")
    try:
        header = json.loads(body[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"unreadable header in {path}: {err}") from None
    if header.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('version')!r} in {path}"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["arrays"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if offset + nbytes > len(body):
            raise CheckpointError(
                f"truncated payload in {path}: array {entry['name']!r} "
                f"needs {nbytes} bytes past offset {offset}"
            )
        arrays[entry["name"]] = np.frombuffer(
            body, dtype="<f4", count=count, offset=offset
        ).reshape(shape).copy()
        offset += nbytes
    if offset != len(body):
        raise CheckpointError(
            f"trailing payload in {path}: {len(body) - offset} unexpected bytes"
        )
    return arrays, header.get("meta", {})
