"""Section grids, the low-ink skip rule, and visiting orders."""

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.errors import InputMismatchError

Origin = Tuple[int, int]


class SlideConfig(BaseModel):
    field: int = Field(64, ge=1, description="Side of the square receptive field in pixels")
    stride: int = Field(32, ge=1, description="Offset between neighbouring sections")
    skip_threshold: float = Field(0.02, ge=0.0, le=1.0, description="Minimum mean ink, as a fraction of peak")
    steps_per_section: int = Field(10, ge=1, description="Drawer steps run in every processed section")

    @model_validator(mode="after")
    def check_stride(self):
        if self.stride > self.field:
            raise ValueError(f"stride {self.stride} exceeds field {self.field}")
        return self


class HierarchyConfig(BaseModel):
    coarse: SlideConfig = Field(default_factory=lambda: SlideConfig(field=128, stride=64))
    fine: SlideConfig = Field(default_factory=SlideConfig)

    @model_validator(mode="after")
    def check_fields(self):
        if self.coarse.field <= self.fine.field:
            raise ValueError(f"coarse field {self.coarse.field} must exceed fine field {self.fine.field}")
        return self


@dataclass(frozen=True)
class Section:
    origin: Origin
    crop_hint: np.ndarray
    crop_state: np.ndarray


def valid_sizes(field: int, stride: int, near: int, count: int = 2) -> List[int]:
    """Image sides closest to ``near`` that tile exactly with (field, stride)."""
    k = max(0, round((near - field) / stride))
    candidates = {field + stride * max(0, k + d) for d in range(-count, count + 1)}
    return sorted(candidates, key=lambda s: (abs(s - near), s))[:count]


def tile(image_size: int, cfg: SlideConfig) -> List[Origin]:
    """Row-major (x, y) origins of every section of a square image.

    Raises:
        InputMismatchError: The image is smaller than the field or does not tile exactly
    """
    if image_size < cfg.field or (image_size - cfg.field) % cfg.stride:
        sizes = ", ".join(str(s) for s in valid_sizes(cfg.field, cfg.stride, image_size))
        raise InputMismatchError(
            f"Image size {image_size} does not tile with field {cfg.field} and stride {cfg.stride}; nearest valid sizes: {sizes}"
        )
    steps = range(0, image_size - cfg.field + 1, cfg.stride)
    return [(x, y) for y in steps for x in steps]


def section_count(image_size: int, cfg: SlideConfig) -> int:
    return ((image_size - cfg.field) // cfg.stride + 1) ** 2


def crop(image: np.ndarray, origin: Origin, field: int) -> np.ndarray:
    x, y = origin
    return image[:, y : y + field, x : x + field]


def paste(image: np.ndarray, section: np.ndarray, origin: Origin) -> None:
    """Write a section back into ``image`` in place at ``origin``."""
    x, y = origin
    _, height, width = section.shape
    image[:, y : y + height, x : x + width] = section


def ink_fraction(hint_crop: np.ndarray, peak: float = 1.0) -> float:
    """Mean pixel value of the crop relative to ``peak``."""
    if peak <= 0:
        return 0.0
    return float(np.mean(hint_crop)) / peak


def should_skip(hint_crop: np.ndarray, cfg: SlideConfig, peak: float = 1.0) -> bool:
    return ink_fraction(hint_crop, peak) < cfg.skip_threshold


def flood_fill_order(origins: Sequence[Origin], ink: Dict[Origin, float], stride: int) -> List[Origin]:
    """Breadth-first order from the highest-ink section over the 4-neighbour grid.

    Ties for the starting section go to the earliest origin in row-major order.
    """
    if not origins:
        return []
    remaining = list(origins)
    known = set(origins)
    seen = set()
    order: List[Origin] = []
    while remaining:
        start = max(remaining, key=lambda o: (ink.get(o, 0.0), -remaining.index(o)))
        queue = deque([start])
        seen.add(start)
        while queue:
            x, y = queue.popleft()
            order.append((x, y))
            for nxt in ((x, y - stride), (x - stride, y), (x + stride, y), (x, y + stride)):
                if nxt in known and nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        remaining = [o for o in remaining if o not in seen]
    return order
