from pathlib import Path
from typing import Optional, Union

import numpy as np
import structlog
from PIL import Image, UnidentifiedImageError

from src.errors import DatasetError, MissingPrerequisiteError
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample

logger = structlog.get_logger(__name__)


def _border_mean(pixels: np.ndarray) -> float:
    return float(np.concatenate([pixels[0], pixels[-1], pixels[:, 0], pixels[:, -1]]).mean())


def load_glyph(path: Path, size: int, binarize_threshold: Optional[float] = None) -> np.ndarray:
    """One grayscale 1×size×size canvas with ink bright on a dark background."""
    with Image.open(path) as image:
        image = image.convert("L").resize((size, size), Image.Resampling.BILINEAR)
        pixels = np.asarray(image, dtype=np.float32) / 255.0
    if _border_mean(pixels) > 0.5:
        pixels = 1.0 - pixels
    if binarize_threshold is not None:
        pixels = (pixels >= binarize_threshold).astype(np.float32)
    return pixels[None]


def load_image_dir(
    path: Union[str, Path],
    size: int = 64,
    binarize_threshold: Optional[float] = None,
    limit: Optional[int] = None,
    task: str = "image_dir",
    domain: str = "stroke",
) -> Dataset:
    """Recreation dataset from a directory of PNG files, read in filename order.

    Unreadable files are skipped with a warning.
    """
    path = Path(path)
    if not path.is_dir():
        raise MissingPrerequisiteError(path, "image directory")
    files = sorted(path.glob("*.png"))
    if limit is not None:
        files = files[:limit]

    samples = []
    for file in files:
        try:
            glyph = load_glyph(file, size, binarize_threshold)
        except (OSError, UnidentifiedImageError) as e:
            logger.warning(f"Skipping unreadable image {file}: {e}")
            continue
        samples.append(TaskSample(hint=glyph, target=glyph.copy()))
    if not samples:
        raise DatasetError(f"No readable PNG images in {path}")

    logger.info(f"Loaded {len(samples)} images from {path}")
    meta = DatasetMeta(
        task=task,
        image_size=size,
        channels=1,
        domain=domain,
        params={"source": str(path), "binarize_threshold": binarize_threshold},
    )
    return Dataset(samples, meta)
