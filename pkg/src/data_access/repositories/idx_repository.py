"""
IDX container reader and writer (MNIST layout).

    offset 0   big-endian u32 magic: 0x00000803 images (n, rows, cols), 0x00000801 labels (n,)
    offset 4   one big-endian u32 per dimension
    then       uint8 payload, last dimension varying fastest

Files ending in .gz are (de)compressed transparently.
"""
import gzip
import struct
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from src.data_access.models.dataset_model import Dataset, remap_labels
from src.data_access.repositories.interfaces import IDatasetRepository
from src.shared.exceptions import (
    DatasetIOError,
    IdxCountMismatchError,
    IdxMagicError,
    IdxParseError,
    IdxTruncatedError,
    LabelDomainError,
)
from src.shared.logging import get_logger
from src.shared.numerics import Matrix

logger = get_logger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def _read_bytes(path: str) -> bytes:
    try:
        if str(path).endswith(".gz"):
            with gzip.open(path, "rb") as f:
                return f.read()
        with open(path, "rb") as f:
            return f.read()
    except (OSError, EOFError) as e:
        raise DatasetIOError(str(path), f"cannot read: {e}") from e


def _write_bytes(path: str, data: bytes) -> None:
    try:
        if str(path).endswith(".gz"):
            with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(data)
        else:
            with open(path, "wb") as f:
                f.write(data)
    except OSError as e:
        raise DatasetIOError(str(path), f"cannot write: {e}") from e


def parse_idx(raw: bytes, path: str, magic: int) -> Tuple[Tuple[int, ...], npt.NDArray[np.uint8]]:
    """
    Returns:
        (dimension sizes, flat uint8 payload)
    """
    if len(raw) < 4:
        raise IdxTruncatedError(path, len(raw), "file shorter than the magic number")
    (found,) = struct.unpack_from(">I", raw, 0)
    if found != magic:
        raise IdxMagicError(path, 0, f"magic 0x{found:08x}, expected 0x{magic:08x}")

    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxTruncatedError(path, len(raw), f"header needs {header_len} bytes")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)

    expected = int(np.prod(dims, dtype=np.int64))
    available = len(raw) - header_len
    if available < expected:
        raise IdxTruncatedError(path, len(raw), f"payload holds {available} of {expected} declared bytes")
    if available > expected:
        raise IdxParseError(path, header_len + expected, f"{available - expected} trailing bytes after payload")
    return dims, np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header_len)


def read_idx_images(path: str) -> Tuple[Matrix, Tuple[int, int]]:
    """
    Returns:
        (X with one flattened image per column as reals in [0, 255], (rows, cols))
    """
    (count, rows, cols), payload = parse_idx(_read_bytes(path), str(path), IMAGES_MAGIC)
    X = payload.reshape(count, rows * cols).T.astype(np.float64)
    return np.ascontiguousarray(X), (rows, cols)


def read_idx_labels(path: str) -> npt.NDArray[np.uint8]:
    (_,), payload = parse_idx(_read_bytes(path), str(path), LABELS_MAGIC)
    return payload


def read_idx(images_path: str, labels_path: str) -> Dataset:
    X, shape = read_idx_images(images_path)
    raw_labels = read_idx_labels(labels_path)
    if raw_labels.size != X.shape[1]:
        raise IdxCountMismatchError(
            str(labels_path), 4, f"{raw_labels.size} labels for {X.shape[1]} images"
        )
    labels, class_values = remap_labels([str(int(v)) for v in raw_labels])
    logger.info(f"Read {X.shape[1]} images of {shape[0]}x{shape[1]} with {len(class_values)} classes")
    return Dataset(X=X, labels=labels, class_values=class_values, image_shape=shape)


def encode_idx(dims: Tuple[int, ...], payload: npt.NDArray[np.uint8]) -> bytes:
    magic = IMAGES_MAGIC if len(dims) == 3 else LABELS_MAGIC
    return struct.pack(f">I{len(dims)}I", magic, *dims) + np.ascontiguousarray(payload, dtype=np.uint8).tobytes()


def write_idx(dataset: Dataset, images_path: str, labels_path: str) -> None:
    """Inverse of read_idx: pixels must be integers in [0, 255], label values integer strings."""
    rows, cols = dataset.image_shape or (1, dataset.n_features)
    if rows * cols != dataset.n_features:
        raise IdxParseError(str(images_path), 4, f"image shape {rows}x{cols} does not hold {dataset.n_features} pixels")

    pixels = dataset.X.T
    bad = np.flatnonzero((pixels != np.round(pixels)) | (pixels < 0) | (pixels > 255))
    if bad.size:
        raise IdxParseError(str(images_path), 16 + int(bad[0]), "pixel is not an integer in [0, 255]")

    try:
        byte_of_class = np.asarray([int(value) for value in dataset.class_values], dtype=np.int64)
    except ValueError:
        raise LabelDomainError(dataset.class_values[0], "integer labels in [0, 255]") from None
    out_of_range = byte_of_class[(byte_of_class < 0) | (byte_of_class > 255)]
    if out_of_range.size:
        raise LabelDomainError(int(out_of_range[0]), "integer labels in [0, 255]")

    _write_bytes(images_path, encode_idx((dataset.n_samples, rows, cols), pixels.astype(np.uint8)))
    _write_bytes(labels_path, encode_idx((dataset.n_samples,), byte_of_class[dataset.labels].astype(np.uint8)))


class IdxDatasetRepository(IDatasetRepository):
    """Dataset repository over IDX image/label file pairs"""

    def read_dataset(self, data_path: str, labels_path: Optional[str] = None) -> Dataset:
        if labels_path is None:
            raise DatasetIOError(str(data_path), "IDX images need a labels file (--labels)")
        return read_idx(data_path, labels_path)

    def read_features(self, data_path: str) -> Matrix:
        X, _ = read_idx_images(data_path)
        return X
