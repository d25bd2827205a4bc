"""Length-prefixed binary frames for protocol messages.

Frame layout, all little-endian unsigned 64-bit:

    q  M  y  K  R  x  count  value[0] ... value[count-1]

Shards, queries, answers and updates are flattened to their residue values
in C order before framing; the header carries enough context to re-shape
on the other side. Used by the simulator's transcript logs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .protocol import CodeSpec

_HEADER = struct.Struct("<7Q")


@dataclass(frozen=True)
class Frame:
    q: int
    m_count: int
    spec: CodeSpec
    values: tuple[int, ...]


def pack_frame(q: int, m_count: int, spec: CodeSpec, values) -> bytes:
    flat = np.asarray(values, dtype=np.int64).reshape(-1)
    if flat.size and (flat.min() < 0 or flat.max() >= q):
        raise DimensionMismatch("frame values must be canonical residues")
    head = _HEADER.pack(q, m_count, spec.y, spec.K, spec.R, spec.x, flat.size)
    return head + flat.astype("<u8").tobytes()


def unpack_frame(buf: bytes, offset: int = 0) -> tuple[Frame, int]:
    """Decode one frame starting at ``offset``; returns (frame, next_offset)."""
    q, m_count, y, k, r, x, count = _HEADER.unpack_from(buf, offset)
    start = offset + _HEADER.size
    end = start + 8 * count
    if end > len(buf):
        raise DimensionMismatch("truncated frame")
    values = tuple(int(v) for v in np.frombuffer(buf[start:end], dtype="<u8"))
    spec = CodeSpec(K=k, R=r, x=x, y=y)
    return Frame(q=q, m_count=m_count, spec=spec, values=values), end


def unpack_all(buf: bytes) -> list[Frame]:
    frames = []
    offset = 0
    while offset < len(buf):
        frame, offset = unpack_frame(buf, offset)
        frames.append(frame)
    return frames
