"""SACT activation files.

Layout: magic "SACT", u32 version, u32 S, u32 n, f64 scale, S u64 ids, then
S*n little-endian f32 values in row-major order.
"""
import logging
import struct
from pathlib import Path

import numpy as np

from data.activation_dataset import ActivationDataset
from data.atomic_file import write_bytes_atomic
from errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"SACT"
VERSION = 1
HEADER = struct.Struct("<4sIIId")


def to_bytes(dataset: ActivationDataset) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, dataset.rows, dataset.n, float(dataset.scale))
    ids = np.ascontiguousarray(dataset.ids, dtype="<u8").tobytes()
    values = np.ascontiguousarray(dataset.data, dtype="<f4").tobytes()
    return header + ids + values


def from_bytes(payload: bytes) -> ActivationDataset:
    if len(payload) < HEADER.size:
        raise FormatError("Activation header truncated", offset=len(payload))
    magic, version, rows, n, scale = HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise FormatError(f"Bad activation file magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"Unsupported activation file version {version}", offset=4)
    if not np.isfinite(scale) or scale <= 0:
        raise FormatError(f"Invalid scale {scale}", offset=16)

    ids_offset = HEADER.size
    values_offset = ids_offset + 8 * rows
    end = values_offset + 4 * rows * n
    if len(payload) < values_offset:
        raise FormatError(f"Id block truncated, expected {rows} ids", offset=len(payload))
    if len(payload) < end:
        raise FormatError(f"Value block truncated, expected {rows}x{n} values", offset=len(payload))
    if len(payload) > end:
        raise FormatError("Trailing bytes after value block", offset=end)

    ids = np.frombuffer(payload, dtype="<u8", count=rows, offset=ids_offset).astype(np.uint64)
    values = np.frombuffer(payload, dtype="<f4", count=rows * n, offset=values_offset)
    return ActivationDataset(values.astype(np.float64).reshape(rows, n), scale=scale, ids=ids)


def save_activations(dataset: ActivationDataset, path: str | Path):
    write_bytes_atomic(path, to_bytes(dataset))
    logger.info(f"Saved {dataset.rows}x{dataset.n} activations (scale={dataset.scale:.6g}) to {path}")


def load_activations(path: str | Path) -> ActivationDataset:
    with open(path, "rb") as file:
        dataset = from_bytes(file.read())
    logger.info(f"Loaded {dataset.rows}x{dataset.n} activations from {path}")
    return dataset
