"""Reference renderers R(x, y).

Canvases are float32 arrays shaped C×H×W with values in [0, 1]. Every
renderer returns a new array and never mutates its input.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence, Tuple

import numpy as np

from src.render.actions import PrismAction, RectAction, StrokeAction
from src.render.bezier import sample_curve
from src.render.color import lab_to_srgb


def stroke_coverage(action: StrokeAction, height: int, width: int) -> Tuple[np.ndarray, slice, slice]:
    """Anti-aliased coverage of a stroke, cropped to its on-canvas bounding box.

    Each curve sample stamps a disc of radius thickness/2 whose rim falls off
    linearly over one pixel; coverage is the maximum over all stamps.

    Returns:
        (coverage, row slice, column slice); coverage is empty when the stroke is off-canvas
    """
    radius = action.thickness / 2.0
    reach = radius + 0.5
    samples = sample_curve(action.p0, action.c, action.p1)

    x_lo = max(0, math.floor(samples[:, 0].min() - reach))
    x_hi = min(width - 1, math.ceil(samples[:, 0].max() + reach))
    y_lo = max(0, math.floor(samples[:, 1].min() - reach))
    y_hi = min(height - 1, math.ceil(samples[:, 1].max() + reach))
    rows, cols = slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1)
    if x_lo > x_hi or y_lo > y_hi:
        return np.zeros((0, 0), dtype=np.float32), rows, cols

    span = math.ceil(reach) + 1
    offsets = np.arange(-span, span + 1)
    base_x = np.floor(samples[:, 0]).astype(np.int64)
    base_y = np.floor(samples[:, 1]).astype(np.int64)
    px = base_x[:, None, None] + offsets[None, None, :]
    py = base_y[:, None, None] + offsets[None, :, None]
    dist = np.sqrt((px - samples[:, 0, None, None]) ** 2 + (py - samples[:, 1, None, None]) ** 2)
    cover = np.clip(reach - dist, 0.0, 1.0)

    px, py = np.broadcast_arrays(px, py)
    inside = (px >= x_lo) & (px <= x_hi) & (py >= y_lo) & (py <= y_hi) & (cover > 0.0)
    coverage = np.zeros((y_hi - y_lo + 1, x_hi - x_lo + 1), dtype=np.float64)
    np.maximum.at(coverage, (py[inside] - y_lo, px[inside] - x_lo), cover[inside])
    return coverage.astype(np.float32), rows, cols


def render_stroke(state: np.ndarray, action: StrokeAction) -> np.ndarray:
    """Grayscale strokes composite by pixel maximum; coloured strokes alpha-over."""
    out = state.copy()
    if action.thickness <= 0.0:
        return out
    _, height, width = state.shape
    coverage, rows, cols = stroke_coverage(action, height, width)
    if coverage.size == 0:
        return out

    region = out[:, rows, cols]
    if action.color is None:
        out[:, rows, cols] = np.maximum(region, coverage[None])
    else:
        rgb = lab_to_srgb(action.color).astype(np.float32)[:, None, None]
        alpha = coverage[None]
        out[:, rows, cols] = region * (1.0 - alpha) + rgb * alpha
    return out


def rect_pixel_span(a: float, b: float, limit: int) -> Tuple[int, int]:
    """Inclusive pixel range covered by corners a, b (order-normalized), clipped to [0, limit)."""
    lo = math.floor(min(a, b) + 0.5)
    hi = math.floor(max(a, b) + 0.5)
    return max(lo, 0), min(hi, limit - 1)


def render_rect(state: np.ndarray, action: RectAction) -> np.ndarray:
    out = state.copy()
    _, height, width = state.shape
    x_lo, x_hi = rect_pixel_span(action.x0, action.x1, width)
    y_lo, y_hi = rect_pixel_span(action.y0, action.y1, height)
    if x_lo > x_hi or y_lo > y_hi:
        return out
    rgb = lab_to_srgb(action.color).astype(np.float32)
    out[:, y_lo : y_hi + 1, x_lo : x_hi + 1] = rgb[:, None, None]
    return out


def prism_shadows(action: PrismAction, size: int) -> Tuple[RectAction, RectAction, RectAction]:
    """Orthographic shadows on the XY, XZ and YZ planes as pixel rectangles."""
    scale = size - 1
    lo = [min(action.x0, action.x1), min(action.y0, action.y1), min(action.z0, action.z1)]
    hi = [max(action.x0, action.x1), max(action.y0, action.y1), max(action.z0, action.z1)]
    planes = ((0, 1), (0, 2), (1, 2))
    return tuple(
        RectAction(x0=lo[u] * scale, y0=lo[v] * scale, x1=hi[u] * scale, y1=hi[v] * scale, color=action.color)
        for u, v in planes
    )


def render_prism(views: Sequence[np.ndarray], action: PrismAction) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(views) != 3 or len({v.shape for v in views}) != 1:
        raise ValueError("render_prism needs three colour canvases of equal size")
    size = views[0].shape[1]
    return tuple(render_rect(view, shadow) for view, shadow in zip(views, prism_shadows(action, size)))


def split_views(composite: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    size = composite.shape[1]
    return tuple(composite[:, :, i * size : (i + 1) * size] for i in range(3))


def join_views(views: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(list(views), axis=2)


def render(state: np.ndarray, action) -> np.ndarray:
    """Dispatch one action onto a canvas (prism canvases are three-view composites)."""
    if isinstance(action, StrokeAction):
        return render_stroke(state, action)
    if isinstance(action, RectAction):
        return render_rect(state, action)
    if isinstance(action, PrismAction):
        return join_views(render_prism(split_views(state), action))
    raise TypeError(f"Unsupported action type: {type(action).__name__}")


def render_sequence(state: np.ndarray, actions: Iterable) -> np.ndarray:
    for action in actions:
        state = render(state, action)
    return state


def render_actions_on_blank(domain, actions: Iterable, size: int) -> np.ndarray:
    return render_sequence(domain.blank(size), actions)
