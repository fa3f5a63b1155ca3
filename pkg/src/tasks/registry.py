"""Build the dataset a run config asks for, caching generated tasks on disk."""

from pathlib import Path

import structlog

from src.errors import ConfigError
from src.models.config import RunConfig
from src.tasks.colored_mnist import make_colored_mnist
from src.tasks.dataset import Dataset, load_dataset, save_dataset
from src.tasks.floorplans import gen_floorplans
from src.tasks.image_dir import load_image_dir
from src.tasks.line_art import gen_line_art
from src.tasks.mnist import load_mnist_idx
from src.tasks.prisms import gen_prism_task

logger = structlog.get_logger(__name__)

GENERATED_TASKS = ("floorplan", "prism", "line_art")


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"{name.upper()} must be set for this task")
    return value


def cache_dir(config: RunConfig) -> Path:
    return config.data_dir / "cache" / f"{config.task}_{config.domain}_{config.image_size}_{config.n_samples}_seed{config.seed}"


def build_dataset(config: RunConfig, use_cache: bool = True) -> Dataset:
    task = config.task
    if task == "mnist":
        return load_mnist_idx(
            _require(config.images_path, "images_path"),
            config.labels_path,
            limit=config.n_samples,
            size=config.image_size,
            domain=config.domain,
        )
    if task == "colored_mnist":
        mnist = load_mnist_idx(
            _require(config.images_path, "images_path"),
            _require(config.labels_path, "labels_path"),
            limit=config.n_samples,
            size=config.image_size,
        )
        return make_colored_mnist(mnist)
    if task == "image_dir":
        return load_image_dir(
            config.images_path or config.data_dir,
            size=config.image_size,
            limit=config.n_samples,
            domain=config.domain,
            binarize_threshold=config.binarize_threshold,
        )

    if task not in GENERATED_TASKS:
        raise ConfigError(f"Unknown task '{task}'")
    directory = cache_dir(config)
    if use_cache and (directory / "manifest.json").exists():
        logger.info(f"Using cached dataset {directory}")
        return load_dataset(directory)
    if task == "floorplan":
        dataset = gen_floorplans(config.n_samples, config.seed, size=config.image_size)
    elif task == "prism":
        dataset = gen_prism_task(config.n_samples, config.seed, size=config.image_size)
    else:
        dataset = gen_line_art(config.n_samples, config.seed, size=config.image_size)
        dataset.meta = dataset.meta.model_copy(update={"domain": config.domain})
    if use_cache:
        save_dataset(dataset, directory, force=True)
    return dataset
