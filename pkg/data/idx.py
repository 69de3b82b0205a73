"""
IDX file reader and writer.

Layout (big endian):
    u32 magic   0x00000803 for images, 0x00000801 for labels
    u32 dims    one per dimension ([N, rows, cols] or [N])
    u8  payload row-major
Files may be gzip-compressed; compression is detected from the first two bytes.
"""
import gzip
import struct
import zlib
from pathlib import Path

import numpy as np

from helpers.errors import DataFormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

_DIMENSIONS = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}


def read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path} does not exist")
    raw = path.read_bytes()
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError, zlib.error) as e:
            raise DataFormatError(f"{path}: corrupt gzip stream ({e})")
    return raw


def read_idx(path, expected_magic: int) -> np.ndarray:
    """
    Parse one IDX file into a uint8 array of its declared shape.

    Args:
        path (str | Path): Raw or gzip-compressed IDX file.
        expected_magic (int): IMAGES_MAGIC or LABELS_MAGIC.

    Returns:
        np.ndarray: uint8 array of shape [N, rows, cols] or [N].
    """
    raw = read_bytes(path)
    if len(raw) < 4:
        raise DataFormatError(f"{path}: magic number truncated")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise DataFormatError(f"{path}: bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}")

    ndim = _DIMENSIONS[expected_magic]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f"{path}: dimension header truncated")
    dims = struct.unpack(f">{ndim}I", raw[4:header])

    expected = int(np.prod(dims, dtype=np.int64))
    payload = len(raw) - header
    if payload != expected:
        raise DataFormatError(f"{path}: payload has {payload} bytes, dimensions {list(dims)} need {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, values: np.ndarray, compress: bool = False) -> Path:
    """ Write a uint8 array of shape [N, rows, cols] or [N] as an IDX file. """
    values = np.asarray(values, dtype=np.uint8)
    magic = {3: IMAGES_MAGIC, 1: LABELS_MAGIC}.get(values.ndim)
    if magic is None:
        raise DataFormatError(f"IDX writer supports 1-d labels or 3-d images, got shape {values.shape}")
    raw = struct.pack(f">I{values.ndim}I", magic, *values.shape) + values.tobytes(order="C")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(gzip.compress(raw, mtime=0) if compress else raw)
    return path
