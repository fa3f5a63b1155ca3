"""Ablation suites that check the relative orderings of drawer variants."""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd
import structlog

from src.canvas.network import CanvasNet
from src.drawer.network import DrawerConfig, build_drawer
from src.drawer.training import DrawerTrainConfig, eval_drawer, train_drawer
from src.models.config import RunConfig
from src.models.reports import OrderingCheck, SuiteResult, SuiteRow
from src.render.actions import get_domain
from src.sliding.inference import slide_infer
from src.sliding.tiling import SlideConfig
from src.sliding.training import slide_train
from src.tasks.dataset import Dataset

logger = structlog.get_logger(__name__)

CanvasLookup = Callable[[str], CanvasNet]


@dataclass(frozen=True)
class Ordering:
    """``lhs`` beats ``rhs`` per seed when lhs·(1 + margin) < factor·rhs (or ≤ when not strict)."""

    lhs: str
    rhs: str
    min_seeds: int
    factor: float = 1.0
    margin: float = 0.0
    strict: bool = True

    def holds(self, lhs: float, rhs: float) -> bool:
        left, right = lhs * (1.0 + self.margin), self.factor * rhs
        return left < right if self.strict else left <= right

    def describe(self) -> str:
        op = "<" if self.strict else "<="
        scale = f"{self.factor:g}·" if self.factor != 1.0 else ""
        margin = f" with {self.margin:.0%} margin" if self.margin else ""
        return f"{self.lhs} {op} {scale}{self.rhs}{margin} in >= {self.min_seeds} seeds"


@dataclass
class Variant:
    name: str
    overrides: Dict[str, object] = field(default_factory=dict)


def majority(n_seeds: int) -> int:
    return max(1, math.ceil(2 * n_seeds / 3))


def check_orderings(rows: Sequence[SuiteRow], orderings: Sequence[Ordering], metric: str = "canvas_sse") -> List[OrderingCheck]:
    scores: Dict[str, Dict[int, float]] = {}
    for row in rows:
        scores.setdefault(row.name, {})[row.seed] = getattr(row, metric)
    checks = []
    for ordering in orderings:
        seeds = sorted(set(scores[ordering.lhs]) & set(scores[ordering.rhs]))
        passed = sum(ordering.holds(scores[ordering.lhs][s], scores[ordering.rhs][s]) for s in seeds)
        checks.append(
            OrderingCheck(
                description=ordering.describe(),
                passed=passed >= ordering.min_seeds,
                seeds_passed=passed,
                seeds_required=ordering.min_seeds,
            )
        )
    return checks


def suite_table(result: SuiteResult) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in result.rows])
    return frame.sort_values(["name", "seed"]).reset_index(drop=True)


def suite_summary(result: SuiteResult) -> pd.DataFrame:
    return suite_table(result).groupby("name")[["canvas_sse", "reference_sse"]].mean()


# MNIST drawer comparison

TABLE1_VARIANTS = (
    Variant("4-step LSTM", {"n_steps": 4, "use_lstm": True}),
    Variant("4-step no-LSTM", {"n_steps": 4, "use_lstm": False}),
    Variant("20-step LSTM", {"n_steps": 20, "use_lstm": True}),
)


def run_mnist_table1(config: RunConfig, dataset: Dataset, canvas: CanvasNet, seeds: Sequence[int]) -> SuiteResult:
    train, held_out = dataset.split(config.eval_fraction or 0.1)
    domain = get_domain(config.domain, config.fixed_thickness)
    rows = []
    for seed in seeds:
        for variant in TABLE1_VARIANTS:
            shape = DrawerConfig(domain=config.domain, **variant.overrides)
            drawer = build_drawer(shape.domain, config.image_size, use_lstm=shape.use_lstm, seed=seed)
            cfg = DrawerTrainConfig(n_steps=shape.n_steps, epochs=config.epochs, batch_size=config.batch_size, lr=config.lr, seed=seed)
            train_drawer(drawer, canvas, train.samples, cfg)
            result = eval_drawer(drawer, canvas, held_out.samples, shape.n_steps, domain, config.batch_size)
            rows.append(SuiteRow(name=variant.name, seed=seed, canvas_sse=result.canvas_sse, reference_sse=result.reference_sse))
            logger.info("suite_row", suite="mnist-table1", variant=variant.name, seed=seed, sse=result.canvas_sse)

    n = len(seeds)
    orderings = (
        Ordering("20-step LSTM", "4-step LSTM", min_seeds=majority(n)),
        Ordering("4-step LSTM", "4-step no-LSTM", min_seeds=majority(n), factor=1.05, strict=False),
        Ordering("4-step LSTM", "4-step no-LSTM", min_seeds=majority(n)),
    )
    return SuiteResult(suite="mnist-table1", rows=rows, checks=check_orderings(rows, orderings))


# sliding sketch comparison

TABLE2_VARIANTS = (
    Variant("overlap", {}),
    Variant("no-overlap", {"overlap": False}),
    Variant("no-LSTM", {"use_lstm": False}),
    Variant("fixed-thickness", {"domain": "stroke"}),
    Variant("4-step", {"steps_per_section": 4}),
)


def corpus_sse(images: Sequence[np.ndarray], canvases: Sequence[np.ndarray]) -> float:
    return float(np.mean([np.sum((c.astype(np.float64) - t) ** 2) for c, t in zip(canvases, images)]))


def run_sketch_table2(config: RunConfig, corpus: Dataset, canvas_for: CanvasLookup, seeds: Sequence[int]) -> SuiteResult:
    train, held_out = corpus.split(config.eval_fraction or 0.1)
    train_images = [s.hint for s in train.samples]
    eval_images = [s.hint for s in held_out.samples]
    rows = []
    for seed in seeds:
        for variant in TABLE2_VARIANTS:
            domain_name = str(variant.overrides.get("domain", "stroke_thick"))
            domain = get_domain(domain_name, config.fixed_thickness)
            slide = SlideConfig(
                field=config.slide_field,
                stride=config.slide_stride if variant.overrides.get("overlap", True) else config.slide_field,
                skip_threshold=config.skip_threshold,
                steps_per_section=int(variant.overrides.get("steps_per_section", config.steps_per_section)),
            )
            canvas = canvas_for(domain_name)
            drawer = build_drawer(domain_name, slide.field, use_lstm=bool(variant.overrides.get("use_lstm", True)), seed=seed)
            cfg = DrawerTrainConfig(epochs=config.epochs, batch_size=config.batch_size, lr=config.lr, seed=seed)
            slide_train(drawer, canvas, train_images, slide, cfg, crops_per_image=config.crops_per_image)
            rendered = [slide_infer(drawer, canvas, image, slide, domain).canvas for image in eval_images]
            sse = corpus_sse(eval_images, rendered)
            rows.append(SuiteRow(name=variant.name, seed=seed, canvas_sse=sse, reference_sse=sse))
            logger.info("suite_row", suite="sketch-table2", variant=variant.name, seed=seed, sse=sse)

    n = len(seeds)
    orderings = (
        Ordering("overlap", "no-overlap", min_seeds=majority(n), margin=0.05),
        Ordering("overlap", "no-LSTM", min_seeds=majority(n), margin=0.05),
        Ordering("overlap", "fixed-thickness", min_seeds=majority(n), margin=0.05),
        Ordering("overlap", "4-step", min_seeds=majority(n), strict=False),
    )
    return SuiteResult(suite="sketch-table2", rows=rows, checks=check_orderings(rows, orderings, metric="reference_sse"))


SUITES = {"mnist-table1": run_mnist_table1, "sketch-table2": run_sketch_table2}
