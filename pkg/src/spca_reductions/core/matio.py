"""Matrix file formats.

RMX1 layout: 4-byte magic ``b"RMX1"``, uint64 rows, uint64 cols (both
little-endian), then ``rows * cols`` little-endian float64 values in
row-major order. The CSV alternative starts with a ``rows,cols`` line
followed by one comma-separated line per row.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidParameter

MAGIC = b"RMX1"
_HEADER = struct.Struct("<4sQQ")
_LE_F64 = np.dtype("<f8")
# rows per chunk when streaming large matrices
_CHUNK_ROWS = 4096


def write_rmx1(path, a) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidParameter(f"RMX1 stores 2-D matrices, got shape {a.shape}")
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        for start in range(0, rows, _CHUNK_ROWS):
            fh.write(np.ascontiguousarray(a[start:start + _CHUNK_ROWS], dtype=_LE_F64).tobytes())


def read_rmx1(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise InvalidParameter(f"{path}: truncated RMX1 header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InvalidParameter(f"{path}: bad magic {magic!r}")
        body = fh.read()
    expected = rows * cols * 8
    if len(body) != expected:
        raise InvalidParameter(f"{path}: expected {expected} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype=_LE_F64).astype(np.float64).reshape(rows, cols)


def write_csv_matrix(path, a) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidParameter(f"CSV stores 2-D matrices, got shape {a.shape}")
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]},{a.shape[1]}\n")
        for row in a:
            # repr round-trips float64 exactly
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_csv_matrix(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        try:
            rows, cols = int(header[0]), int(header[1])
        except (IndexError, ValueError):
            raise InvalidParameter(f"{path}: first line must be 'rows,cols'") from None
        out = np.empty((rows, cols), dtype=np.float64)
        for i in range(rows):
            line = fh.readline()
            vals = line.strip().split(",") if cols else []
            if len(vals) != cols:
                raise InvalidParameter(f"{path}: row {i} has {len(vals)} values, expected {cols}")
            out[i] = [float(x) for x in vals]
    return out


def write_matrix(path, a) -> None:
    """Write by extension: ``.csv`` gives CSV, anything else RMX1."""
    if Path(path).suffix.lower() == ".csv":
        write_csv_matrix(path, a)
    else:
        write_rmx1(path, a)


def read_matrix(path) -> np.ndarray:
    """Read RMX1 or CSV, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_rmx1(path)
    return read_csv_matrix(path)
