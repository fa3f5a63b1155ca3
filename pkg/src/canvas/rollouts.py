"""Random renderer rollouts used as imitation data for the canvas network."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field

from src.render.actions import ActionDomain, get_domain

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class RolloutTriple:
    x: np.ndarray
    y: np.ndarray
    x_next: np.ndarray


class RolloutConfig(BaseModel):
    domain: str = Field("stroke", description="Action domain name")
    image_size: int = Field(64, ge=2, description="Canvas height (and width, except prism composites)")
    episode_length: int = Field(8, ge=1, description="Steps between resets to the blank canvas")
    n_triples: int = Field(..., ge=1, description="Number of (x, y, x_next) triples to emit")
    seed: int = Field(0, description="Root seed; each episode draws from its own child stream")
    threads: int = Field(1, ge=1, description="Worker threads for episode sampling")


def episode_count(cfg: RolloutConfig) -> int:
    return -(-cfg.n_triples // cfg.episode_length)


def _episode(domain: ActionDomain, cfg: RolloutConfig, seed_seq: np.random.SeedSequence, length: int) -> List[RolloutTriple]:
    rng = np.random.default_rng(seed_seq)
    x = domain.blank(cfg.image_size)
    triples = []
    for _ in range(length):
        y = rng.uniform(-1.0, 1.0, size=domain.dim).astype(np.float32)
        x_next = domain.render(x, domain.decode(y, cfg.image_size))
        triples.append(RolloutTriple(x=x, y=y, x_next=x_next))
        x = x_next
    return triples


def iter_rollouts(cfg: RolloutConfig, domain: Optional[ActionDomain] = None) -> Iterator[RolloutTriple]:
    """Stream triples episode by episode.

    Episode ``e`` always samples from child ``e`` of ``SeedSequence(cfg.seed)``,
    so the stream does not depend on ``cfg.threads``.
    """
    domain = domain or get_domain(cfg.domain)
    n_episodes = episode_count(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(n_episodes)
    lengths = [min(cfg.episode_length, cfg.n_triples - e * cfg.episode_length) for e in range(n_episodes)]

    if cfg.threads == 1:
        for child, length in zip(children, lengths):
            yield from _episode(domain, cfg, child, length)
        return

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for episode in pool.map(lambda args: _episode(domain, cfg, *args), zip(children, lengths)):
            yield from episode


def sample_rollouts(cfg: RolloutConfig, domain: Optional[ActionDomain] = None) -> List[RolloutTriple]:
    triples = list(iter_rollouts(cfg, domain))
    logger.info("rollouts_sampled", domain=cfg.domain, triples=len(triples), episodes=episode_count(cfg))
    return triples


def stack_triples(triples: Sequence[RolloutTriple]):
    """Stack triples into (x, y, x_next) batch arrays."""
    xs = np.stack([t.x for t in triples]).astype(np.float32)
    ys = np.stack([t.y for t in triples]).astype(np.float32)
    nexts = np.stack([t.x_next for t in triples]).astype(np.float32)
    return xs, ys, nexts


def unstack_triples(xs: np.ndarray, ys: np.ndarray, nexts: np.ndarray) -> List[RolloutTriple]:
    return [RolloutTriple(x=xs[i], y=ys[i], x_next=nexts[i]) for i in range(xs.shape[0])]
