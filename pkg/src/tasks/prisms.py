from typing import Sequence

import numpy as np
import structlog

from src.render.actions import PrismAction
from src.render.color import LabColor
from src.render.raster import render_sequence
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample
from src.tasks.floorplans import ROOM_PALETTE

logger = structlog.get_logger(__name__)

PRISM_VIEW_SIZE = 32
MIN_EXTENT = 0.1


def random_prism(rng: np.random.Generator, palette: Sequence[LabColor]) -> PrismAction:
    lo = rng.uniform(0.0, 1.0 - MIN_EXTENT, size=3)
    hi = rng.uniform(lo + MIN_EXTENT, 1.0)
    color = palette[int(rng.integers(0, len(palette)))]
    return PrismAction(x0=lo[0], y0=lo[1], z0=lo[2], x1=hi[0], y1=hi[1], z1=hi[2], color=color)


def gen_prism_task(
    n: int,
    seed: int,
    size: int = PRISM_VIEW_SIZE,
    min_prisms: int = 1,
    max_prisms: int = 3,
    palette: Sequence[LabColor] = ROOM_PALETTE,
) -> Dataset:
    """Scenes of 1-3 prisms observed as XY | XZ | YZ views side by side (3×S×3S)."""
    rng = np.random.default_rng(seed)
    samples, ground_truth = [], []
    for _ in range(n):
        prisms = [random_prism(rng, palette) for _ in range(int(rng.integers(min_prisms, max_prisms + 1)))]
        views = render_sequence(np.zeros((3, size, 3 * size), dtype=np.float32), prisms)
        samples.append(TaskSample(hint=views, target=views.copy()))
        ground_truth.append(prisms)
    logger.info(f"Generated {n} prism scenes (seed {seed})")
    meta = DatasetMeta(
        task="prism",
        image_size=size,
        channels=3,
        domain="prism",
        seed=seed,
        params={"n": n, "min_prisms": min_prisms, "max_prisms": max_prisms},
    )
    return Dataset(samples, meta, ground_truth)
