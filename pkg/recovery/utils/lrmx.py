"""
Matrix file formats.

LRMX record layout (little-endian):
    b"LRMX" | u32 version (=1) | u64 rows | u64 cols | rows*cols float64, row-major

A stack of matrices is stored as consecutive LRMX records in one file.
CSV files are header-free, one comma-separated matrix row per line.
"""

import struct
from pathlib import Path
from typing import Iterator, List, Union

import numpy as np

from recovery.exceptions import FormatError
from recovery.utils.dense_core import Matrix, as_matrix

MAGIC = b"LRMX"
VERSION = 1
HEADER = struct.Struct("<4sIQQ")
FLOAT = np.dtype("<f8")

PathLike = Union[str, Path]


def encode_matrix(matrix: Matrix) -> bytes:
    matrix = as_matrix(matrix)
    rows, cols = matrix.shape
    return HEADER.pack(MAGIC, VERSION, rows, cols) + matrix.astype(FLOAT, copy=False).tobytes(order="C")


def _decode_records(payload: bytes) -> Iterator[Matrix]:
    offset = 0
    while offset < len(payload):
        if len(payload) - offset < HEADER.size:
            raise FormatError(f"truncated LRMX header at byte {offset}")
        magic, version, rows, cols = HEADER.unpack_from(payload, offset)
        if magic != MAGIC:
            raise FormatError(f"bad LRMX magic {magic!r} at byte {offset}")
        if version != VERSION:
            raise FormatError(f"unsupported LRMX version {version}")
        offset += HEADER.size
        count = rows * cols
        end = offset + count * FLOAT.itemsize
        if end > len(payload):
            raise FormatError(f"truncated LRMX body: need {count} floats at byte {offset}")
        data = np.frombuffer(payload, dtype=FLOAT, count=count, offset=offset)
        yield data.reshape(rows, cols).astype(np.float64)
        offset = end


def write_lrmx(path: PathLike, matrix: Matrix) -> None:
    Path(path).write_bytes(encode_matrix(matrix))


def read_lrmx(path: PathLike) -> Matrix:
    """Read a file holding exactly one LRMX record."""
    records = list(_decode_records(Path(path).read_bytes()))
    if len(records) != 1:
        raise FormatError(f"{path}: expected one LRMX record, found {len(records)}")
    return records[0]


def write_lrmx_stack(path: PathLike, stack: np.ndarray) -> None:
    """Write an (N, rows, cols) array as N concatenated LRMX records."""
    with open(path, "wb") as handle:
        for matrix in stack:
            handle.write(encode_matrix(matrix))


def read_lrmx_stack(path: PathLike) -> np.ndarray:
    records: List[Matrix] = list(_decode_records(Path(path).read_bytes()))
    if not records:
        raise FormatError(f"{path}: no LRMX records")
    shapes = {record.shape for record in records}
    if len(shapes) != 1:
        raise FormatError(f"{path}: records have mixed shapes {sorted(shapes)}")
    return np.stack(records)


def write_csv(path: PathLike, matrix: Matrix) -> None:
    np.savetxt(path, as_matrix(matrix), delimiter=",", fmt="%.17g")


def read_csv(path: PathLike) -> Matrix:
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return as_matrix(data, name=str(path))
