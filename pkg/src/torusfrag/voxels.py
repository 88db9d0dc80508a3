"""Binary voxel dumps of component labels.

Layout, little-endian throughout: magic ``b"TFRG"``, format version (u16),
d (u32), N (u32), then N^d u32 labels in row-major order. Label 0 marks an
occupied site; vacant component k (0 = largest) is stored as k + 1.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .components import ComponentStats

MAGIC = b"TFRG"
VERSION = 1
_HEADER = struct.Struct("<4sHII")
HEADER_SIZE = _HEADER.size


class VoxelFormatError(ValueError):
    pass


def encode_labels(labels: np.ndarray) -> np.ndarray:
    return (np.asarray(labels, dtype=np.int64) + 1).astype("<u4")


def dump_voxels(stats: ComponentStats, path) -> Path:
    path = Path(path)
    payload = encode_labels(stats.labels)
    if payload.shape[0] != stats.n**stats.d:
        raise VoxelFormatError(f"label array has {payload.shape[0]} entries, expected {stats.n}^{stats.d}")
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, stats.d, stats.n))
            fh.write(payload.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write voxel file {path}: {exc}") from exc
    return path


def load_voxels(path) -> tuple[int, int, np.ndarray]:
    """(d, N, labels) with labels back in the ComponentStats convention (-1 = occupied)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read voxel file {path}: {exc}") from exc
    if len(raw) < HEADER_SIZE:
        raise VoxelFormatError(f"{path}: truncated header")
    magic, version, d, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise VoxelFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VoxelFormatError(f"{path}: unsupported version {version}")
    expected = HEADER_SIZE + 4 * n**d
    if len(raw) != expected:
        raise VoxelFormatError(f"{path}: {len(raw)} bytes, expected {expected}")
    labels = np.frombuffer(raw, dtype="<u4", offset=HEADER_SIZE).astype(np.int64) - 1
    return d, n, labels.astype(np.int32)
