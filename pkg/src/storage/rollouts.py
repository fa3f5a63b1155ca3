"""Rollout dataset persistence: one packed container, or PNG pairs plus action lines.

The packed container keeps canvases bit-exact and is the default for training
data. PNG canvases are quantized to 8 bits per channel, so a round trip is only
accurate to half a grey level (0.5/255).
"""

from pathlib import Path
from typing import List, Literal, Union

import numpy as np
import structlog

from src.canvas.rollouts import RolloutConfig, RolloutTriple, stack_triples, unstack_triples
from src.errors import ArtifactError, MissingPrerequisiteError
from src.render.actions import get_domain
from src.render.export import format_action_line, load_png, save_png
from src.storage.checkpoints import load_checkpoint, save_checkpoint
from src.utils.json_saver import ArtifactSaver, file_sha256

logger = structlog.get_logger(__name__)

RolloutFormat = Literal["packed", "png"]
PACKED_FILE = "rollouts.cdck"
MANIFEST_FILE = "manifest.json"


def save_rollouts(
    directory: Union[str, Path],
    triples: List[RolloutTriple],
    cfg: RolloutConfig,
    fmt: RolloutFormat = "packed",
    force: bool = False,
) -> Path:
    """Write the triples and a manifest; returns the manifest path."""
    saver = ArtifactSaver(directory, force=force)
    saver.claim(MANIFEST_FILE, PACKED_FILE if fmt == "packed" else "actions.txt")
    manifest = {"config": cfg.model_dump(mode="json", exclude={"threads"}), "format": fmt, "triples": len(triples)}

    if fmt == "packed":
        xs, ys, nexts = stack_triples(triples)
        path = save_checkpoint(saver.path(PACKED_FILE), {"x": xs, "y": ys, "x_next": nexts})
        manifest["files"] = {PACKED_FILE: file_sha256(path)}
    else:
        domain = get_domain(cfg.domain)
        lines = []
        for i, triple in enumerate(triples):
            save_png(saver.path(f"{i:07d}_x.png"), triple.x)
            save_png(saver.path(f"{i:07d}_next.png"), triple.x_next)
            action = domain.decode(triple.y, cfg.image_size)
            vector = " ".join(f"{v:.9g}" for v in triple.y)
            lines.append(f"{vector}\t{format_action_line(action)}")
        saver.save_text("actions.txt", "\n".join(lines) + "\n")
        manifest["files"] = {"actions.txt": file_sha256(saver.path("actions.txt"))}
    saver.save_json(MANIFEST_FILE, manifest)
    logger.info("rollouts_saved", directory=str(saver.base_dir), triples=len(triples), format=fmt)
    return saver.path(MANIFEST_FILE)


def load_rollouts(directory: Union[str, Path]) -> List[RolloutTriple]:
    directory = Path(directory)
    if not (directory / MANIFEST_FILE).exists():
        raise MissingPrerequisiteError(directory / MANIFEST_FILE, "rollout manifest")
    manifest = ArtifactSaver(directory).load_json(MANIFEST_FILE)

    if manifest["format"] == "packed":
        arrays = load_checkpoint(directory / PACKED_FILE)
        triples = unstack_triples(arrays["x"], arrays["y"], arrays["x_next"])
    else:
        channels = get_domain(manifest["config"]["domain"]).channels
        triples = []
        for i, line in enumerate((directory / "actions.txt").read_text(encoding="utf-8").splitlines()):
            vector = np.array([float(v) for v in line.split("\t", 1)[0].split()], dtype=np.float32)
            triples.append(
                RolloutTriple(
                    x=load_png(directory / f"{i:07d}_x.png", channels),
                    y=vector,
                    x_next=load_png(directory / f"{i:07d}_next.png", channels),
                )
            )
    if len(triples) != manifest["triples"]:
        raise ArtifactError(f"{directory}: manifest lists {manifest['triples']} triples, found {len(triples)}")
    return triples
