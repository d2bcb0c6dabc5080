"""
IDX reader/writer for MNIST-family files.

Header: uint32 big-endian magic (0x00000803 images, 0x00000801 labels), one
big-endian uint32 per dimension, then raw unsigned bytes. Files ending in
.gz are decompressed transparently.
"""
import gzip
import logging
import struct
from pathlib import Path

import numpy as np

from .datasets import LabeledDataset, require_nonempty
from .exceptions import BadMagicError, CountMismatchError, DatasetError, DatasetFormatError, TruncatedFileError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
PIXEL_SCALE = 255.0


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as handle:
                return handle.read()
        return path.read_bytes()
    except (OSError, EOFError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc


def read_idx_array(path, expected_magic: int) -> np.ndarray:
    path = Path(path)
    payload = _read_bytes(path)
    if len(payload) < 4:
        raise TruncatedFileError(path, 4, len(payload))
    (magic,) = struct.unpack(">I", payload[:4])
    if magic != expected_magic:
        raise BadMagicError(path, magic, expected_magic)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(payload) < header:
        raise TruncatedFileError(path, header, len(payload))
    shape = struct.unpack(f">{ndim}I", payload[4:header])
    expected = header + int(np.prod(shape, dtype=np.int64))
    if len(payload) < expected:
        raise TruncatedFileError(path, expected, len(payload))
    if len(payload) > expected:
        raise DatasetFormatError(f"{path}: {len(payload) - expected} trailing bytes after the payload")
    if expected == header:
        return np.zeros(shape, dtype=np.uint8)
    return np.frombuffer(payload, dtype=np.uint8, offset=header).reshape(shape)


def load_idx(images_path, labels_path, class_count=None) -> LabeledDataset:
    images = read_idx_array(images_path, IMAGES_MAGIC)
    labels = read_idx_array(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(images.shape[0], labels.shape[0])
    inputs = images.reshape(images.shape[0], int(np.prod(images.shape[1:]))).astype(np.float64) / PIXEL_SCALE
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    dataset = require_nonempty(LabeledDataset(inputs, labels.astype(np.int64), class_count), images_path)
    logger.info("idx loaded images=%s n=%d in=%d classes=%d", images_path, len(dataset), dataset.input_dim, dataset.class_count)
    return dataset


def encode_idx(array, magic: int) -> bytes:
    array = np.asarray(array)
    if array.ndim != magic & 0xFF:
        raise DatasetError(f"magic 0x{magic:08x} needs {magic & 0xFF} dimensions, got {array.ndim}")
    if array.size and (array.min() < 0 or array.max() > 255):
        raise DatasetError("IDX unsigned-byte payload must lie in [0, 255]")
    header = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=np.uint8).tobytes()


def write_idx(path, array, magic: int) -> Path:
    path = Path(path)
    payload = encode_idx(array, magic)
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as handle:
            handle.write(payload)
    else:
        path.write_bytes(payload)
    return path
