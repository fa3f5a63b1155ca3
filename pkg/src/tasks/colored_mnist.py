"""Translation task: grayscale digit hint → digit painted in its class colour."""

from typing import List, Optional, Sequence

import numpy as np

from src.errors import DatasetError
from src.render.color import LabColor, lab_to_srgb
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample


def default_palette() -> List[LabColor]:
    """Ten hues evenly spaced around the ab-plane at L=60, chroma 70."""
    palette = []
    for k in range(10):
        angle = np.deg2rad(36.0 * k)
        palette.append(LabColor(L=60.0, a=70.0 * float(np.cos(angle)), b=70.0 * float(np.sin(angle))))
    return palette


def make_colored_mnist(mnist: Dataset, labels: Optional[Sequence[int]] = None, palette: Optional[Sequence[LabColor]] = None) -> Dataset:
    palette = list(palette or default_palette())
    labels = list(labels) if labels is not None else mnist.labels
    if labels is None:
        raise DatasetError("Colored MNIST needs digit labels; pass the IDX label file")
    if len(labels) != len(mnist.samples):
        raise DatasetError(f"{len(mnist.samples)} digits but {len(labels)} labels")
    colors = np.stack([lab_to_srgb(c) for c in palette]).astype(np.float32)

    samples = []
    for sample, label in zip(mnist.samples, labels):
        if not 0 <= int(label) < len(palette):
            raise DatasetError(f"label {label} outside palette range 0..{len(palette) - 1}")
        gray = sample.hint[0]
        mask = (gray >= 0.5).astype(np.float32)
        hint = np.repeat(gray[None], 3, axis=0)
        target = mask[None] * colors[int(label)][:, None, None]
        samples.append(TaskSample(hint=hint, target=target.astype(np.float32), label=int(label)))

    meta = DatasetMeta(
        task="colored_mnist",
        image_size=mnist.meta.image_size,
        channels=3,
        domain="color_stroke",
        params={"palette": [c.model_dump() for c in palette]},
    )
    return Dataset(samples, meta)
