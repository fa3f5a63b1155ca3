"""Unrolling the drawer through the frozen canvas, training it, and scoring it."""

import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field

from src.autodiff import ops
from src.autodiff.node import Node, backward, lift, no_grad
from src.autodiff.optim import Adam
from src.canvas.network import CanvasNet
from src.canvas.training import epoch_order
from src.drawer.network import drawer_step
from src.errors import DatasetError, FrozenCanvasError, NumericError
from src.models.reports import DrawerEval, EpochMetrics
from src.render.actions import ActionDomain
from src.render.color import LabColor, nearest_palette_index
from src.render.raster import render_sequence
from src.tasks.dataset import TaskSample, stack_samples

logger = structlog.get_logger(__name__)


class DrawerTrainConfig(BaseModel):
    n_steps: int = Field(4, ge=1)
    epochs: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    seed: int = 0


def unroll(drawer, canvas: CanvasNet, hint, x0, n_steps: int, require_frozen: bool = True) -> Tuple[Node, List[Node]]:
    """Run N drawer steps, each committed through x_{n+1} = pixel_max(C(x_n, y_{n+1}), x_n).

    Returns:
        (final state, the N action nodes in order)
    """
    if require_frozen and not canvas.frozen:
        raise FrozenCanvasError("unroll needs a frozen canvas network; call freeze() after canvas training")
    hint, state = lift(hint), lift(x0)
    recurrent = drawer.initial_state(hint.shape[0])
    actions: List[Node] = []
    for _ in range(n_steps):
        action, recurrent = drawer_step(drawer, hint, state, recurrent)
        state = ops.pixel_max(canvas(state, action), state)
        actions.append(action)
    return state, actions


def train_drawer(
    drawer,
    canvas: CanvasNet,
    samples: Sequence[TaskSample],
    cfg: DrawerTrainConfig,
    optimizer: Optional[Adam] = None,
    start_epoch: int = 0,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
) -> List[float]:
    """Minimize SSE(C(D(X)), X') over drawer parameters only.

    Raises:
        FrozenCanvasError: The canvas is not frozen, or its parameters changed during training
        DatasetError: No samples were given
        NumericError: A loss or gradient became non-finite
    """
    if not canvas.frozen:
        raise FrozenCanvasError("train_drawer needs a frozen canvas network")
    if not samples:
        raise DatasetError("train_drawer needs at least one sample")
    checksum = canvas.checksum()
    hints, targets, starts = stack_samples(samples)
    optimizer = optimizer or Adam(drawer.parameters(), lr=cfg.lr)
    history: List[float] = []

    for epoch in range(start_epoch, cfg.epochs):
        started = time.perf_counter()
        order = epoch_order(len(hints), cfg.seed, epoch)
        losses = []
        for batch_index, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            try:
                final, _ = unroll(drawer, canvas, hints[idx], starts[idx], cfg.n_steps)
                loss = ops.sse_loss(final, targets[idx])
                optimizer.zero_grad()
                backward(loss)
            except NumericError as e:
                raise NumericError(f"drawer training diverged at epoch {epoch}, batch {batch_index}: {e}") from e
            optimizer.step()
            losses.append(float(loss.value))

        metrics = EpochMetrics(epoch=epoch, loss=float(np.mean(losses)), wall_time=time.perf_counter() - started)
        history.append(metrics.loss)
        logger.info("drawer_epoch", epoch=epoch, loss=metrics.loss, wall_time=round(metrics.wall_time, 3))
        if on_epoch is not None:
            on_epoch(metrics)

    if canvas.checksum() != checksum:
        raise FrozenCanvasError("canvas parameters changed during drawer training")
    drawer.mark_trained()
    return history


def infer_batch(drawer, canvas: CanvasNet, hints: np.ndarray, starts: np.ndarray, n_steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient-free unroll of a batch.

    Returns:
        (final canvas-network states B×C×H×W, action vectors B×N×dim)
    """
    with no_grad():
        final, actions = unroll(drawer, canvas, hints, starts, n_steps, require_frozen=False)
    return final.value, np.stack([a.value for a in actions], axis=1)


def infer_actions(drawer, canvas: CanvasNet, hint: np.ndarray, n_steps: int, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Action vectors (N×dim) for one C×H×W hint, starting from ``x0`` or a blank canvas."""
    start = np.zeros(canvas.state_shape, dtype=np.float32) if x0 is None else x0
    _, vectors = infer_batch(drawer, canvas, hint[None], start[None], n_steps)
    return vectors[0]


def decode_actions(domain: ActionDomain, vectors: np.ndarray, size: int) -> list:
    return [domain.decode(v, size) for v in vectors]


@dataclass
class DrawerRollout:
    canvas_finals: np.ndarray
    vectors: np.ndarray
    actions: List[list]
    reference_finals: np.ndarray


def drawer_rollout(
    drawer,
    canvas: CanvasNet,
    samples: Sequence[TaskSample],
    n_steps: int,
    domain: ActionDomain,
    batch_size: int = 32,
) -> DrawerRollout:
    """Run inference over ``samples`` and replay every action list through the reference renderer."""
    if not samples:
        raise DatasetError("no samples to evaluate")
    hints, targets, starts = stack_samples(samples)
    size = targets.shape[2]
    finals, vectors = [], []
    for lo in range(0, len(hints), batch_size):
        final, vec = infer_batch(drawer, canvas, hints[lo : lo + batch_size], starts[lo : lo + batch_size], n_steps)
        finals.append(final)
        vectors.append(vec)
    vectors = np.concatenate(vectors)
    actions = [decode_actions(domain, v, size) for v in vectors]
    references = np.stack([render_sequence(starts[i], actions[i]) for i in range(len(actions))])
    return DrawerRollout(np.concatenate(finals), vectors, actions, references)


def eval_drawer(
    drawer,
    canvas: CanvasNet,
    samples: Sequence[TaskSample],
    n_steps: int,
    domain: ActionDomain,
    batch_size: int = 32,
) -> DrawerEval:
    """Mean per-sample SSE in canvas space and after reference-renderer replay."""
    rollout = drawer_rollout(drawer, canvas, samples, n_steps, domain, batch_size)
    return summarize_rollout(rollout, samples)


def summarize_rollout(rollout: DrawerRollout, samples: Sequence[TaskSample]) -> DrawerEval:
    _, targets, starts = stack_samples(samples)
    return DrawerEval(
        canvas_sse=float(ops.sse_per_image(rollout.canvas_finals, targets).mean()),
        reference_sse=float(ops.sse_per_image(rollout.reference_finals, targets).mean()),
        blank_sse=float(ops.sse_per_image(starts, targets).mean()),
        count=len(samples),
    )


def color_class_accuracy(actions: Sequence[Sequence], labels: Sequence[int], palette: Sequence[LabColor]) -> float:
    """Share of samples whose stroke colours, snapped to the nearest palette entry, vote for the right label.

    Ties in the vote go to the lowest palette index; a sample without coloured
    strokes counts as wrong.
    """
    if len(actions) != len(labels):
        raise DatasetError(f"{len(actions)} action lists but {len(labels)} labels")
    if not labels:
        raise DatasetError("color_class_accuracy needs at least one sample")
    correct = 0
    for sample_actions, label in zip(actions, labels):
        votes = [nearest_palette_index(a.color, palette) for a in sample_actions if getattr(a, "color", None) is not None]
        if votes and int(np.bincount(votes, minlength=len(palette)).argmax()) == int(label):
            correct += 1
    return correct / len(labels)
