"""Synthetic floorplans: wall outlines as hints, class-coloured rooms as targets."""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.render.actions import RectAction
from src.render.color import LabColor, nearest_palette_index
from src.render.raster import rect_pixel_span, render_sequence
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample

logger = structlog.get_logger(__name__)

FLOORPLAN_SIZE = 128
MARGIN = 4
MIN_ROOM_SIDE = 12
ROOM_CLASSES = ("living", "bedroom", "kitchen", "bathroom", "hallway", "storage")
ROOM_PALETTE: Tuple[LabColor, ...] = (
    LabColor(L=70.0, a=-40.0, b=50.0),
    LabColor(L=45.0, a=20.0, b=-60.0),
    LabColor(L=65.0, a=50.0, b=50.0),
    LabColor(L=85.0, a=-10.0, b=-30.0),
    LabColor(L=90.0, a=0.0, b=80.0),
    LabColor(L=40.0, a=60.0, b=-10.0),
)

Box = Tuple[int, int, int, int]  # x0, y0, x1, y1 with exclusive upper bounds


def split_rooms(rng: np.random.Generator, interior: Box, n_rooms: int, min_side: int = MIN_ROOM_SIDE) -> List[Box]:
    """Recursively split the largest splittable room across its longer side."""
    rooms = [interior]
    while len(rooms) < n_rooms:
        candidates = [r for r in rooms if max(r[2] - r[0], r[3] - r[1]) >= 2 * min_side]
        if not candidates:
            break
        room = max(candidates, key=lambda r: ((r[2] - r[0]) * (r[3] - r[1]), -rooms.index(r)))
        x0, y0, x1, y1 = room
        rooms.remove(room)
        if x1 - x0 >= y1 - y0:
            cut = int(rng.integers(x0 + min_side, x1 - min_side + 1))
            rooms += [(x0, y0, cut, y1), (cut, y0, x1, y1)]
        else:
            cut = int(rng.integers(y0 + min_side, y1 - min_side + 1))
            rooms += [(x0, y0, x1, cut), (x0, cut, x1, y1)]
    return rooms


def room_to_rect(room: Box, color: LabColor) -> RectAction:
    x0, y0, x1, y1 = room
    return RectAction(x0=float(x0), y0=float(y0), x1=float(x1 - 1), y1=float(y1 - 1), color=color)


def outline_hint(rooms: Sequence[Box], size: int) -> np.ndarray:
    """White page with one-pixel black walls around every room."""
    hint = np.ones((3, size, size), dtype=np.float32)
    for x0, y0, x1, y1 in rooms:
        hint[:, y0, x0:x1] = 0.0
        hint[:, y1 - 1, x0:x1] = 0.0
        hint[:, y0:y1, x0] = 0.0
        hint[:, y0:y1, x1 - 1] = 0.0
    return hint


def gen_floorplans(n: int, seed: int, size: int = FLOORPLAN_SIZE, min_rooms: int = 3, max_rooms: int = 8) -> Dataset:
    rng = np.random.default_rng(seed)
    interior = (MARGIN, MARGIN, size - MARGIN, size - MARGIN)
    samples, ground_truth = [], []
    for _ in range(n):
        rooms = split_rooms(rng, interior, int(rng.integers(min_rooms, max_rooms + 1)))
        classes = rng.integers(0, len(ROOM_PALETTE), size=len(rooms))
        rects = [room_to_rect(room, ROOM_PALETTE[int(c)]) for room, c in zip(rooms, classes)]
        target = render_sequence(np.zeros((3, size, size), dtype=np.float32), rects)
        samples.append(TaskSample(hint=outline_hint(rooms, size), target=target))
        ground_truth.append(rects)
    logger.info(f"Generated {n} floorplans (seed {seed})")
    meta = DatasetMeta(
        task="floorplan",
        image_size=size,
        channels=3,
        domain="rect",
        seed=seed,
        params={"n": n, "min_rooms": min_rooms, "max_rooms": max_rooms, "classes": list(ROOM_CLASSES)},
    )
    return Dataset(samples, meta, ground_truth)


def label_map(rects: Sequence[RectAction], size: int, palette: Sequence[LabColor] = ROOM_PALETTE) -> np.ndarray:
    """Per-pixel room class (-1 for background), later rects overwrite earlier ones."""
    labels = np.full((size, size), -1, dtype=np.int64)
    for rect in rects:
        x_lo, x_hi = rect_pixel_span(rect.x0, rect.x1, size)
        y_lo, y_hi = rect_pixel_span(rect.y0, rect.y1, size)
        if x_lo <= x_hi and y_lo <= y_hi:
            labels[y_lo : y_hi + 1, x_lo : x_hi + 1] = nearest_palette_index(rect.color, palette)
    return labels


def floorplan_iou(
    pred_rects: Sequence[RectAction],
    gt_rects: Sequence[RectAction],
    size: int = FLOORPLAN_SIZE,
    palette: Optional[Sequence[LabColor]] = None,
) -> float:
    """Mean IoU over the room classes present in either label map."""
    palette = palette or ROOM_PALETTE
    pred = label_map(pred_rects, size, palette)
    gt = label_map(gt_rects, size, palette)
    scores = []
    for cls in range(len(palette)):
        p, g = pred == cls, gt == cls
        union = np.count_nonzero(p | g)
        if union:
            scores.append(np.count_nonzero(p & g) / union)
    return float(np.mean(scores)) if scores else 1.0
