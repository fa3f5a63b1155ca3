"""Dataset containers shared by every task, plus on-disk caching."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field, TypeAdapter

from src.errors import DatasetError, MissingPrerequisiteError
from src.render.actions import Action
from src.utils.json_saver import ArtifactSaver

logger = structlog.get_logger(__name__)

_ACTION_LIST = TypeAdapter(List[Action])


@dataclass
class TaskSample:
    """One (hint X, target X') pair; ``initial`` overrides the blank starting canvas."""

    hint: np.ndarray
    target: np.ndarray
    initial: Optional[np.ndarray] = None
    label: Optional[int] = None

    def start(self) -> np.ndarray:
        return self.initial if self.initial is not None else np.zeros_like(self.target)


class DatasetMeta(BaseModel):
    task: str
    image_size: int = Field(..., description="Canvas side (view side for prism composites)")
    channels: int
    domain: str
    seed: Optional[int] = None
    params: Dict[str, Any] = Field(default_factory=dict, description="Generator or loader parameters")


@dataclass
class Dataset:
    samples: List[TaskSample]
    meta: DatasetMeta
    ground_truth: Optional[List[List[Any]]] = field(default=None)

    def __len__(self) -> int:
        return len(self.samples)

    def __post_init__(self):
        shapes = {(s.hint.shape, s.target.shape) for s in self.samples}
        if len(shapes) > 1:
            raise DatasetError(f"Dataset '{self.meta.task}' mixes sample shapes: {sorted(shapes)}")

    @property
    def labels(self) -> Optional[List[int]]:
        if any(s.label is None for s in self.samples):
            return None
        return [int(s.label) for s in self.samples]

    def split(self, eval_fraction: float) -> Tuple["Dataset", "Dataset"]:
        """Deterministic tail split: the last ``eval_fraction`` of samples are held out."""
        n_eval = int(round(len(self.samples) * eval_fraction))
        cut = len(self.samples) - n_eval
        gt = self.ground_truth
        return (
            Dataset(self.samples[:cut], self.meta, gt[:cut] if gt else None),
            Dataset(self.samples[cut:], self.meta, gt[cut:] if gt else None),
        )


def stack_samples(samples: Sequence[TaskSample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(hints, targets, starts) as float32 batch arrays."""
    if not samples:
        raise DatasetError("no samples to stack")
    hints = np.stack([s.hint for s in samples]).astype(np.float32)
    targets = np.stack([s.target for s in samples]).astype(np.float32)
    starts = np.stack([s.start() for s in samples]).astype(np.float32)
    return hints, targets, starts


def save_dataset(dataset: Dataset, directory: Union[str, Path], force: bool = False) -> Path:
    saver = ArtifactSaver(directory, force=force)
    saver.claim("samples.npz", "manifest.json")
    hints, targets, starts = stack_samples(dataset.samples)
    arrays = {"hints": hints, "targets": targets, "initials": starts}
    if dataset.labels is not None:
        arrays["labels"] = np.asarray(dataset.labels, dtype=np.int64)
    np.savez_compressed(saver.path("samples.npz"), **arrays)

    manifest: Dict[str, Any] = {"meta": dataset.meta.model_dump(mode="json"), "count": len(dataset)}
    if dataset.ground_truth is not None:
        manifest["ground_truth"] = [_ACTION_LIST.dump_python(actions, mode="json") for actions in dataset.ground_truth]
    saver.save_json("manifest.json", manifest)
    logger.info(f"Cached {len(dataset)} '{dataset.meta.task}' samples in {saver.base_dir}")
    return saver.base_dir


def load_dataset(directory: Union[str, Path]) -> Dataset:
    directory = Path(directory)
    if not (directory / "manifest.json").exists():
        raise MissingPrerequisiteError(directory / "manifest.json", "dataset manifest")
    manifest = ArtifactSaver(directory).load_json("manifest.json")
    with np.load(directory / "samples.npz") as arrays:
        hints, targets, initials = arrays["hints"], arrays["targets"], arrays["initials"]
        labels = arrays["labels"] if "labels" in arrays else None
    samples = []
    for i in range(len(hints)):
        initial = initials[i] if np.any(initials[i]) else None
        label = int(labels[i]) if labels is not None else None
        samples.append(TaskSample(hint=hints[i], target=targets[i], initial=initial, label=label))
    ground_truth = None
    if "ground_truth" in manifest:
        ground_truth = [_ACTION_LIST.validate_python(actions) for actions in manifest["ground_truth"]]
    return Dataset(samples, DatasetMeta(**manifest["meta"]), ground_truth)
