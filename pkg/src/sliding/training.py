"""Training one field-sized drawer on random crops of a large-image corpus."""

import functools
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.autodiff.optim import Adam
from src.canvas.network import CanvasNet
from src.drawer.training import DrawerTrainConfig, train_drawer
from src.errors import DatasetError
from src.models.reports import EpochMetrics, ImageSkipStats, SlideTrainReport
from src.render.actions import ActionDomain
from src.sliding.inference import slide_infer
from src.sliding.tiling import HierarchyConfig, SlideConfig, crop, should_skip, tile
from src.tasks.dataset import TaskSample

logger = structlog.get_logger(__name__)


def corpus_skip_stats(corpus: Sequence[np.ndarray], cfg: SlideConfig) -> List[ImageSkipStats]:
    """Skip-rule outcome on the inference grid of every corpus image."""
    stats = []
    for index, image in enumerate(corpus):
        origins = tile(image.shape[1], cfg)
        peak = float(image.max())
        skipped = sum(1 for o in origins if peak <= 0 or should_skip(crop(image, o, cfg.field), cfg, peak))
        stats.append(ImageSkipStats(image=index, sections=len(origins), skipped=skipped))
    return stats


def sample_crops(
    corpus: Sequence[np.ndarray],
    cfg: SlideConfig,
    crops_per_image: int,
    seed: int,
    initials: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[TaskSample], int]:
    """Random field×field recreation crops at uniform offsets, low-ink crops dropped.

    Returns:
        (kept samples, number of crops drawn before filtering)
    """
    rng = np.random.default_rng(seed)
    kept: List[TaskSample] = []
    drawn = 0
    for index, image in enumerate(corpus):
        _, height, width = image.shape
        if height < cfg.field or width < cfg.field:
            raise DatasetError(f"Corpus image {index} ({height}x{width}) is smaller than the {cfg.field}px field")
        peak = float(image.max())
        for _ in range(crops_per_image):
            origin = (int(rng.integers(0, width - cfg.field + 1)), int(rng.integers(0, height - cfg.field + 1)))
            drawn += 1
            hint = np.ascontiguousarray(crop(image, origin, cfg.field))
            if peak <= 0 or should_skip(hint, cfg, peak):
                continue
            initial = None
            if initials is not None:
                initial = np.ascontiguousarray(crop(initials[index], origin, cfg.field))
            kept.append(TaskSample(hint=hint, target=hint.copy(), initial=initial))
    return kept, drawn


def slide_train(
    drawer,
    canvas: CanvasNet,
    corpus: Sequence[np.ndarray],
    cfg: SlideConfig,
    train_cfg: DrawerTrainConfig,
    crops_per_image: int = 16,
    initials: Optional[Sequence[np.ndarray]] = None,
    optimizer: Optional[Adam] = None,
    start_epoch: int = 0,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
) -> SlideTrainReport:
    """Train ``drawer`` on crops; the same weights then serve every section at inference.

    Raises:
        DatasetError: The corpus is empty or every crop fell under the skip threshold
    """
    if not corpus:
        raise DatasetError("slide_train needs at least one corpus image")
    samples, drawn = sample_crops(corpus, cfg, crops_per_image, train_cfg.seed, initials)
    if not samples:
        raise DatasetError(f"All {drawn} sampled crops fell under the {cfg.skip_threshold:.1%} ink threshold")
    logger.info("slide_crops", drawn=drawn, kept=len(samples), field=cfg.field)
    history = train_drawer(
        drawer,
        canvas,
        samples,
        train_cfg.model_copy(update={"n_steps": cfg.steps_per_section}),
        optimizer=optimizer,
        start_epoch=start_epoch,
        on_epoch=on_epoch,
    )
    return SlideTrainReport(
        crops_sampled=drawn,
        crops_kept=len(samples),
        history=history,
        skip_stats=corpus_skip_stats(corpus, cfg),
    )


def train_hierarchy(
    coarse_drawer,
    fine_drawer,
    coarse_canvas: CanvasNet,
    fine_canvas: CanvasNet,
    corpus: Sequence[np.ndarray],
    hcfg: HierarchyConfig,
    train_cfg: DrawerTrainConfig,
    domain: ActionDomain,
    crops_per_image: int = 16,
    on_epoch: Optional[Callable[[str, EpochMetrics], None]] = None,
) -> Tuple[SlideTrainReport, SlideTrainReport]:
    """Coarse level first; fine crops then start from the coarse pass's output.

    ``on_epoch`` receives the level name ("coarse" or "fine") with each epoch's metrics.
    """
    coarse_cb = functools.partial(on_epoch, "coarse") if on_epoch else None
    fine_cb = functools.partial(on_epoch, "fine") if on_epoch else None
    coarse_report = slide_train(
        coarse_drawer, coarse_canvas, corpus, hcfg.coarse, train_cfg, crops_per_image, on_epoch=coarse_cb
    )
    coarse_canvases = [slide_infer(coarse_drawer, coarse_canvas, image, hcfg.coarse, domain).canvas for image in corpus]
    fine_report = slide_train(
        fine_drawer,
        fine_canvas,
        corpus,
        hcfg.fine,
        train_cfg.model_copy(update={"seed": train_cfg.seed + 1}),
        crops_per_image,
        initials=coarse_canvases,
        on_epoch=fine_cb,
    )
    return coarse_report, fine_report
