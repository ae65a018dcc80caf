"""SAEP parameter checkpoints.

Layout: magic "SAEP", u32 version, u8 variant tag (bit 0x10 marks untied
magnitude weights), u32 n, u32 m, then each tensor as a u64 element count
followed by little-endian f32 values in row-major order. Tensor order is
W_gate, b_gate, r_mag | W_mag, b_mag, W_dec, b_dec; magnitude tensors are
present only for gated variants.
"""
import logging
import struct
from pathlib import Path

import numpy as np

from ai.sae_params import SaeParams
from ai.sae_variant import SaeVariant
from data.atomic_file import write_bytes_atomic
from errors import FormatError

logger = logging.getLogger(__name__)

MAGIC = b"SAEP"
VERSION = 1
UNTIED_FLAG = 0x10
HEADER = struct.Struct("<4sIBII")
COUNT = struct.Struct("<Q")


def _tensor_shapes(variant: SaeVariant, n: int, m: int, untied: bool) -> list[tuple[str, tuple[int, ...]]]:
    shapes = [("W_gate", (m, n)), ("b_gate", (m,))]
    if variant.is_gated:
        shapes.append(("W_mag", (m, n)) if untied else ("r_mag", (m,)))
        shapes.append(("b_mag", (m,)))
    shapes += [("W_dec", (n, m)), ("b_dec", (n,))]
    return shapes


def to_bytes(params: SaeParams) -> bytes:
    tag = params.variant.tag | (UNTIED_FLAG if params.untied else 0)
    parts = [HEADER.pack(MAGIC, VERSION, tag, params.n, params.m)]
    for name, _ in _tensor_shapes(params.variant, params.n, params.m, params.untied):
        values = np.ascontiguousarray(getattr(params, name), dtype="<f4")
        parts.append(COUNT.pack(values.size))
        parts.append(values.tobytes())
    return b"".join(parts)


def from_bytes(payload: bytes) -> SaeParams:
    if len(payload) < HEADER.size:
        raise FormatError("Checkpoint header truncated", offset=len(payload))
    magic, version, tag, n, m = HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise FormatError(f"Bad checkpoint magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"Unsupported checkpoint version {version}", offset=4)
    try:
        variant = SaeVariant.from_tag(tag & ~UNTIED_FLAG)
    except ValueError as e:
        raise FormatError(str(e), offset=8) from e
    untied = bool(tag & UNTIED_FLAG)

    offset = HEADER.size
    tensors = {}
    for name, shape in _tensor_shapes(variant, n, m, untied):
        if offset + COUNT.size > len(payload):
            raise FormatError(f"Truncated before tensor {name}", offset=offset)
        (count,) = COUNT.unpack_from(payload, offset)
        expected = int(np.prod(shape))
        if count != expected:
            raise FormatError(f"Tensor {name} has {count} elements, expected {expected}", offset=offset)
        offset += COUNT.size
        end = offset + 4 * count
        if end > len(payload):
            raise FormatError(f"Tensor {name} truncated", offset=len(payload))
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(payload):
        raise FormatError("Trailing bytes after last tensor", offset=offset)
    return SaeParams(variant=variant, **tensors)


def save_checkpoint(params: SaeParams, path: str | Path):
    write_bytes_atomic(path, to_bytes(params))
    logger.info(f"Saved {params.variant.value} checkpoint (n={params.n}, m={params.m}) to {path}")


def load_checkpoint(path: str | Path) -> SaeParams:
    with open(path, "rb") as file:
        params = from_bytes(file.read())
    logger.info(f"Loaded {params.variant.value} checkpoint (n={params.n}, m={params.m}) from {path}")
    return params
