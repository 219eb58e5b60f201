"""Reader/writer for the IDX byte format used by MNIST-style datasets.

Layout: a 4-byte magic (two zero bytes, a dtype code, the number of
dimensions), big-endian uint32 sizes per dimension, then the raw data.
Only the unsigned-byte dtype (code 0x08) is supported here, which is
what image and label files use.  Files may be gzip-compressed; a
``.gz`` suffix or the gzip magic is detected automatically.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

_DTYPE_U8 = 0x08


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz" or raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path) -> np.ndarray:
    """Load an IDX file (optionally gzipped) into a uint8 array."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated IDX header")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0:
        raise ValueError(f"{path}: bad IDX magic {raw[:4]!r}")
    if dtype_code != _DTYPE_U8:
        raise ValueError(f"{path}: unsupported IDX dtype code 0x{dtype_code:02x}")
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise ValueError(f"{path}: truncated IDX dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    count = int(np.prod(dims)) if dims else 1
    body = raw[header_end:]
    if len(body) != count:
        raise ValueError(f"{path}: expected {count} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file; gzip when path ends in .gz."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">HBB", 0, _DTYPE_U8, array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    payload = header + array.tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        # fixed mtime so identical arrays produce identical files
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def load_image_set(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Load an (images, labels) pair and cross-check their counts."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise ValueError(f"{images_path}: expected 3-D image tensor, got {images.shape}")
    if labels.ndim != 1:
        raise ValueError(f"{labels_path}: expected 1-D label vector, got {labels.shape}")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"image/label count mismatch: {images.shape[0]} vs {labels.shape[0]}")
    return images, labels
