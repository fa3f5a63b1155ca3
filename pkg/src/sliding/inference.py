"""Sliding and hierarchical inference over images larger than the drawer's field."""

from dataclasses import dataclass, field
from typing import List, Literal, Optional

import numpy as np
import structlog

from src.canvas.network import CanvasNet
from src.drawer.training import infer_actions
from src.errors import ConfigError, InputMismatchError, UntrainedModelError
from src.render.actions import ActionDomain
from src.render.raster import render
from src.sliding.tiling import (
    HierarchyConfig,
    Origin,
    SlideConfig,
    crop,
    flood_fill_order,
    ink_fraction,
    paste,
    should_skip,
    tile,
)

logger = structlog.get_logger(__name__)

VisitOrder = Literal["row-major", "flood-fill"]


@dataclass
class SlideResult:
    actions: List = field(default_factory=list)
    canvas: Optional[np.ndarray] = None
    initial_canvas: Optional[np.ndarray] = None
    visited: List[Origin] = field(default_factory=list)
    skipped: List[Origin] = field(default_factory=list)


@dataclass
class HierarchicalResult:
    coarse: SlideResult
    fine: SlideResult

    @property
    def actions(self) -> List:
        return self.coarse.actions + self.fine.actions

    @property
    def canvas(self) -> np.ndarray:
        return self.fine.canvas


def _check_inputs(drawer, canvas: CanvasNet, hint: np.ndarray, cfg: SlideConfig, domain: ActionDomain) -> None:
    if not getattr(drawer, "trained", True):
        raise UntrainedModelError("Sliding inference needs a trained drawer; run train-drawer or train-sliding first")
    if domain.name == "prism":
        raise ConfigError("Prism composites cannot be slid; use whole-image inference")
    if hint.ndim != 3 or hint.shape[1] != hint.shape[2]:
        raise InputMismatchError(f"Sliding inference needs a square C×S×S hint, got shape {hint.shape}")
    expected = (canvas.spec.height, canvas.spec.width)
    if expected != (cfg.field, cfg.field):
        raise InputMismatchError(f"Canvas network covers {expected[0]}x{expected[1]} but the slide field is {cfg.field}")


def slide_infer(
    drawer,
    canvas: CanvasNet,
    hint: np.ndarray,
    cfg: SlideConfig,
    domain: ActionDomain,
    order: VisitOrder = "row-major",
    state: Optional[np.ndarray] = None,
) -> SlideResult:
    """Draw a large image section by section with one field-sized drawer.

    Each processed section reads the running global canvas as its starting
    state. Its actions are committed with the reference renderer inside the
    section window only, then written back before the next section is visited;
    the returned actions are shifted to global coordinates.
    """
    _check_inputs(drawer, canvas, hint, cfg, domain)
    origins = tile(hint.shape[1], cfg)
    peak = float(hint.max()) if hint.size else 0.0
    if order == "flood-fill":
        ink = {o: ink_fraction(crop(hint, o, cfg.field), peak) for o in origins}
        origins = flood_fill_order(origins, ink, cfg.stride)
    elif order != "row-major":
        raise ConfigError(f"Unknown visiting order '{order}'")

    global_canvas = np.zeros((canvas.spec.channels,) + hint.shape[1:], dtype=np.float32) if state is None else state.copy()
    result = SlideResult(initial_canvas=global_canvas.copy())
    for origin in origins:
        crop_hint = crop(hint, origin, cfg.field)
        if peak <= 0 or should_skip(crop_hint, cfg, peak):
            result.skipped.append(origin)
            continue
        crop_state = np.ascontiguousarray(crop(global_canvas, origin, cfg.field))
        vectors = infer_actions(drawer, canvas, np.ascontiguousarray(crop_hint), cfg.steps_per_section, x0=crop_state)
        for vector in vectors:
            local = domain.decode(vector, cfg.field)
            crop_state = render(crop_state, local)
            result.actions.append(local.translate(*origin))
        paste(global_canvas, crop_state, origin)
        result.visited.append(origin)

    result.canvas = global_canvas
    logger.info(
        "slide_infer_done",
        field=cfg.field,
        stride=cfg.stride,
        visited=len(result.visited),
        skipped=len(result.skipped),
        actions=len(result.actions),
    )
    return result


def hierarchical_infer(
    coarse_drawer,
    fine_drawer,
    coarse_canvas: CanvasNet,
    fine_canvas: CanvasNet,
    hint: np.ndarray,
    hcfg: HierarchyConfig,
    domain: ActionDomain,
    order: VisitOrder = "row-major",
) -> HierarchicalResult:
    """Coarse pass first; the fine pass starts from the canvas the coarse pass left."""
    coarse = slide_infer(coarse_drawer, coarse_canvas, hint, hcfg.coarse, domain, order=order)
    fine = slide_infer(fine_drawer, fine_canvas, hint, hcfg.fine, domain, order=order, state=coarse.canvas)
    return HierarchicalResult(coarse=coarse, fine=fine)
