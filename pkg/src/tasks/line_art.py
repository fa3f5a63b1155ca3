"""Synthetic line-art corpus standing in for extracted sketch lines."""

import numpy as np
import structlog

from src.render.actions import THICKNESS_RANGE, StrokeAction
from src.render.raster import render_sequence
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample

logger = structlog.get_logger(__name__)


def random_sketch(rng: np.random.Generator, size: int, n_strokes: int, max_reach: float) -> list:
    """Strokes chained loosely: each starts near the previous endpoint half of the time."""
    strokes = []
    anchor = rng.uniform(0.1 * size, 0.9 * size, size=2)
    lo, hi = THICKNESS_RANGE
    for _ in range(n_strokes):
        if rng.random() < 0.5:
            anchor = rng.uniform(0.1 * size, 0.9 * size, size=2)
        end = np.clip(anchor + rng.uniform(-max_reach, max_reach, size=2), 0, size - 1)
        mid = (anchor + end) / 2.0 + rng.normal(0.0, max_reach / 4.0, size=2)
        strokes.append(
            StrokeAction(
                x0=anchor[0], y0=anchor[1], cx=mid[0], cy=mid[1], x1=end[0], y1=end[1],
                thickness=float(rng.uniform(lo, hi)),
            )
        )
        anchor = end
    return strokes


def gen_line_art(n: int, seed: int, size: int = 256, min_strokes: int = 8, max_strokes: int = 24) -> Dataset:
    rng = np.random.default_rng(seed)
    samples, ground_truth = [], []
    for _ in range(n):
        strokes = random_sketch(rng, size, int(rng.integers(min_strokes, max_strokes + 1)), max_reach=size / 6.0)
        image = render_sequence(np.zeros((1, size, size), dtype=np.float32), strokes)
        samples.append(TaskSample(hint=image, target=image.copy()))
        ground_truth.append(strokes)
    logger.info(f"Generated {n} line-art images at {size}px (seed {seed})")
    meta = DatasetMeta(
        task="line_art",
        image_size=size,
        channels=1,
        domain="stroke_thick",
        seed=seed,
        params={"n": n, "min_strokes": min_strokes, "max_strokes": max_strokes},
    )
    return Dataset(samples, meta, ground_truth)
