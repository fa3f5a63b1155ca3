"""MNIST IDX reader (plain or gzipped) and the 64×64 recreation task."""

import gzip
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
import structlog

from src.errors import DatasetError, MissingPrerequisiteError
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample

logger = structlog.get_logger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
TARGET_SIZE = 64


def _read_bytes(path: Path) -> bytes:
    if not path.exists():
        raise MissingPrerequisiteError(path, "IDX file")
    with open(path, "rb") as f:
        head = f.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as f:
        return f.read()


def read_idx_images(path: Union[str, Path]) -> np.ndarray:
    # i32 magic | i32 count | i32 rows | i32 cols | u8 pixels, big endian
    path = Path(path)
    payload = _read_bytes(path)
    if len(payload) < 16:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">4i", payload[:16])
    if magic != IMAGE_MAGIC:
        raise DatasetError(f"{path}: magic number {magic}, expected {IMAGE_MAGIC} for an image file")
    expected = count * rows * cols
    if len(payload) - 16 < expected:
        raise DatasetError(f"{path}: {len(payload) - 16} pixel bytes, header promises {expected}")
    return np.frombuffer(payload, dtype=np.uint8, count=expected, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: Union[str, Path]) -> np.ndarray:
    # i32 magic | i32 count | u8 labels
    path = Path(path)
    payload = _read_bytes(path)
    if len(payload) < 8:
        raise DatasetError(f"{path}: truncated IDX header")
    magic, count = struct.unpack(">2i", payload[:8])
    if magic != LABEL_MAGIC:
        raise DatasetError(f"{path}: magic number {magic}, expected {LABEL_MAGIC} for a label file")
    if len(payload) - 8 < count:
        raise DatasetError(f"{path}: {len(payload) - 8} label bytes, header promises {count}")
    return np.frombuffer(payload, dtype=np.uint8, count=count, offset=8)


def upscale_digit(image: np.ndarray, size: int = TARGET_SIZE) -> np.ndarray:
    """Zero-pad to size/2 and scale ×2 by nearest neighbour; values to [0, 1]."""
    half = size // 2
    rows, cols = image.shape
    if rows > half or cols > half:
        raise DatasetError(f"digit {rows}x{cols} does not fit a {half}px pad for a {size}px canvas")
    top, left = (half - rows) // 2, (half - cols) // 2
    padded = np.zeros((half, half), dtype=np.float32)
    padded[top : top + rows, left : left + cols] = image.astype(np.float32) / 255.0
    return padded.repeat(2, axis=0).repeat(2, axis=1)[None]


def load_mnist_idx(
    images_path: Union[str, Path],
    labels_path: Optional[Union[str, Path]] = None,
    limit: Optional[int] = None,
    size: int = TARGET_SIZE,
    domain: str = "stroke",
) -> Dataset:
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path) if labels_path is not None else None
    if labels is not None and len(labels) != len(images):
        raise DatasetError(f"{len(images)} images but {len(labels)} labels")
    count = len(images) if limit is None else min(limit, len(images))
    if count == 0:
        raise DatasetError(f"{images_path}: no images")

    samples = []
    for i in range(count):
        digit = upscale_digit(images[i], size)
        samples.append(TaskSample(hint=digit, target=digit.copy(), label=int(labels[i]) if labels is not None else None))
    logger.info(f"Loaded {count} MNIST digits from {images_path}")
    meta = DatasetMeta(task="mnist", image_size=size, channels=1, domain=domain, params={"source": str(images_path)})
    return Dataset(samples, meta)
