"""Canvas network training and evaluation against renderer rollouts."""

import time
from typing import Callable, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field

from src.autodiff import ops
from src.autodiff.node import backward, no_grad
from src.autodiff.optim import Adam
from src.canvas.network import CanvasNet, predict
from src.canvas.rollouts import RolloutTriple, stack_triples
from src.errors import DatasetError, NumericError
from src.models.reports import CanvasEval, DriftReport, EpochMetrics
from src.render.actions import ActionDomain

logger = structlog.get_logger(__name__)

EpochCallback = Callable[[EpochMetrics], None]


class CanvasTrainConfig(BaseModel):
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    seed: int = 0


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Shuffle for one epoch; depends only on (seed, epoch) so resumed runs replay it."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def train_canvas(
    net: CanvasNet,
    triples: Sequence[RolloutTriple],
    cfg: CanvasTrainConfig,
    optimizer: Optional[Adam] = None,
    start_epoch: int = 0,
    on_epoch: Optional[EpochCallback] = None,
) -> List[float]:
    """Fit ``net`` to reproduce x_next from (x, y) by minimizing SSE.

    Returns:
        Mean batch loss for each epoch run (``start_epoch`` .. ``cfg.epochs - 1``)

    Raises:
        DatasetError: No triples were given
        NumericError: A loss or gradient became non-finite
    """
    if not triples:
        raise DatasetError("train_canvas needs at least one rollout triple")
    xs, ys, nexts = stack_triples(triples)
    optimizer = optimizer or Adam(net.parameters(), lr=cfg.lr)
    history: List[float] = []

    for epoch in range(start_epoch, cfg.epochs):
        started = time.perf_counter()
        order = epoch_order(len(xs), cfg.seed, epoch)
        losses = []
        for batch_index, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[lo : lo + cfg.batch_size]
            try:
                loss = ops.sse_loss(net(xs[idx], ys[idx]), nexts[idx])
                optimizer.zero_grad()
                backward(loss)
            except NumericError as e:
                raise NumericError(f"canvas training diverged at epoch {epoch}, batch {batch_index}: {e}") from e
            optimizer.step()
            losses.append(float(loss.value))

        metrics = EpochMetrics(epoch=epoch, loss=float(np.mean(losses)), wall_time=time.perf_counter() - started)
        history.append(metrics.loss)
        logger.info("canvas_epoch", epoch=epoch, loss=metrics.loss, wall_time=round(metrics.wall_time, 3))
        if on_epoch is not None:
            on_epoch(metrics)
    return history


def eval_canvas(net: CanvasNet, triples: Sequence[RolloutTriple], batch_size: int = 64) -> CanvasEval:
    if not triples:
        raise DatasetError("eval_canvas needs at least one held-out triple")
    xs, ys, nexts = stack_triples(triples)
    abs_total = 0.0
    sse_total = 0.0
    for lo in range(0, len(xs), batch_size):
        pred = predict(net, xs[lo : lo + batch_size], ys[lo : lo + batch_size])
        target = nexts[lo : lo + batch_size]
        abs_total += float(np.abs(pred.astype(np.float64) - target).sum())
        sse_total += float(ops.sse_per_image(pred, target).sum())
    return CanvasEval(mae=abs_total / nexts.size, sse=sse_total / len(xs), count=len(xs))


def drift_mae(net: CanvasNet, domain: ActionDomain, n_actions: int = 4, n_sequences: int = 16, seed: int = 0) -> DriftReport:
    """Compare a pixel_max fold of canvas steps with the reference renderer over random sequences.

    ``single_step_mae`` scores each canvas step started from the exact
    reference state; ``composed_mae`` scores the final state of the fold.
    """
    rng = np.random.default_rng(seed)
    size = net.spec.height
    single, composed = [], []
    with no_grad():
        for _ in range(n_sequences):
            reference = domain.blank(size)
            approx = domain.blank(size)
            for _ in range(n_actions):
                y = rng.uniform(-1.0, 1.0, size=(1, domain.dim)).astype(np.float32)
                step_ref = domain.render(reference, domain.decode(y[0], size))
                single.append(ops.mean_abs_error(predict(net, reference[None], y)[0], step_ref))
                approx = np.maximum(predict(net, approx[None], y)[0], approx)
                reference = step_ref
            composed.append(ops.mean_abs_error(approx, reference))
    report = DriftReport(
        single_step_mae=float(np.mean(single)),
        composed_mae=float(np.mean(composed)),
        n_actions=n_actions,
        n_sequences=n_sequences,
    )
    logger.info("canvas_drift", single=report.single_step_mae, composed=report.composed_mae)
    return report
