"""Run configuration: a validated pydantic model backed by a flat KEY=value file."""

from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, model_validator

from src.errors import ConfigError, MissingPrerequisiteError

TaskName = Literal["mnist", "image_dir", "colored_mnist", "floorplan", "prism", "line_art"]
DomainName = Literal["stroke", "stroke_thick", "color_stroke", "rect", "prism"]

TASK_DOMAINS: Dict[str, tuple] = {
    "mnist": ("stroke", "stroke_thick"),
    "image_dir": ("stroke", "stroke_thick"),
    "line_art": ("stroke", "stroke_thick"),
    "colored_mnist": ("color_stroke",),
    "floorplan": ("rect",),
    "prism": ("prism",),
}


def default_task(domain: str) -> Optional[str]:
    """First task that can be drawn with ``domain``."""
    return next((task for task, domains in TASK_DOMAINS.items() if domain in domains), None)


class RunConfig(BaseModel):
    """Every knob of a pipeline run. Field names map to upper-case keys in the config file."""

    task: TaskName = Field("mnist", description="Dataset / task to run")
    domain: DomainName = Field("stroke", description="Action domain of the drawer and canvas")
    image_size: int = Field(64, ge=16, description="Canvas side in pixels (view side for prisms)")
    fixed_thickness: float = Field(1.5, gt=0.0, description="Stroke thickness when it is not an action component")

    n_triples: int = Field(100_000, ge=1, description="Rollout triples for canvas training")
    episode_length: int = Field(8, ge=1, description="Rollout steps between canvas resets")
    canvas_epochs: int = Field(10, ge=1)
    canvas_batch_size: int = Field(32, ge=1)
    canvas_lr: float = Field(1e-3, gt=0.0)

    n_steps: int = Field(4, ge=1, description="Drawer timesteps N")
    use_lstm: bool = Field(True, description="Insert the LSTM between encoder and action head")
    epochs: int = Field(20, ge=1, description="Drawer training epochs")
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, gt=0.0)

    n_samples: int = Field(1000, ge=1, description="Samples to load or generate")
    eval_fraction: float = Field(0.1, ge=0.0, lt=1.0, description="Held-out share of the dataset")
    binarize_threshold: Optional[float] = Field(None, ge=0.0, le=1.0, description="Binarize image_dir glyphs at this level")

    slide_field: int = Field(64, ge=16)
    slide_stride: int = Field(32, ge=1)
    skip_threshold: float = Field(0.02, ge=0.0, le=1.0)
    steps_per_section: int = Field(10, ge=1)
    coarse_field: int = Field(0, ge=0, description="Coarse hierarchy field; 0 disables the hierarchy")
    crops_per_image: int = Field(16, ge=1)

    seed: int = 0
    threads: int = Field(1, ge=1)

    data_dir: Path = Path("data")
    images_path: Optional[Path] = None
    labels_path: Optional[Path] = None
    checkpoint_dir: Path = Path("checkpoints")
    output_dir: Path = Path("outputs")

    @model_validator(mode="after")
    def check_compatibility(self):
        allowed = TASK_DOMAINS[self.task]
        if self.domain not in allowed:
            raise ValueError(f"task '{self.task}' cannot be drawn with domain '{self.domain}' (allowed: {', '.join(allowed)})")
        if self.slide_stride > self.slide_field:
            raise ValueError(f"slide_stride {self.slide_stride} exceeds slide_field {self.slide_field}")
        if self.coarse_field and self.coarse_field <= self.slide_field:
            raise ValueError(f"coarse_field {self.coarse_field} must exceed slide_field {self.slide_field}")
        return self

    def slide_config(self):
        from src.sliding.tiling import SlideConfig

        return SlideConfig(
            field=self.slide_field,
            stride=self.slide_stride,
            skip_threshold=self.skip_threshold,
            steps_per_section=self.steps_per_section,
        )

    def hierarchy_config(self):
        from src.sliding.tiling import HierarchyConfig, SlideConfig

        if not self.coarse_field:
            raise ConfigError("coarse_field is 0; the hierarchy is disabled for this run")
        coarse = SlideConfig(
            field=self.coarse_field,
            stride=self.coarse_field // 2,
            skip_threshold=self.skip_threshold,
            steps_per_section=self.steps_per_section,
        )
        return HierarchyConfig(coarse=coarse, fine=self.slide_config())


def _coerce(values: Mapping[str, Any]) -> Dict[str, Any]:
    known = RunConfig.model_fields
    parsed = {}
    for key, value in values.items():
        name = key.lower()
        if name not in known:
            raise ConfigError(f"Unknown config key '{key}'")
        if value is None or value == "":
            continue
        parsed[name] = value
    return parsed


def build_run_config(values: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig(**_coerce(values))
    except ValidationError as e:
        raise ConfigError(f"Invalid run config: {e}") from e


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """``defaults`` (environment settings) first, then file values, then ``overrides`` (CLI flags) on top."""
    values: Dict[str, Any] = _coerce(defaults or {})
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingPrerequisiteError(path, "config file")
        values.update(_coerce(dotenv_values(path)))
    if overrides:
        values.update(_coerce({k: v for k, v in overrides.items() if v is not None}))
    return build_run_config(values)


def dump_run_config(config: RunConfig) -> str:
    """Serialize as sorted ``KEY=value`` lines; unset optional paths are omitted."""
    lines = []
    for name, value in sorted(config.model_dump(mode="json").items()):
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{name.upper()}={value}")
    return "\n".join(lines) + "\n"
