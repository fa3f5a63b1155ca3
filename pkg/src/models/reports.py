from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class EpochMetrics(BaseModel):
    epoch: int = Field(..., ge=0, description="Zero-based epoch index")
    loss: float = Field(..., description="Mean batch loss over the epoch")
    wall_time: float = Field(..., ge=0.0, description="Seconds spent in the epoch")


class CanvasEval(BaseModel):
    mae: float = Field(..., description="Per-pixel mean absolute error against the reference renderer")
    sse: float = Field(..., description="Mean per-triple sum of squared errors")
    count: int = Field(..., ge=1, description="Number of evaluated triples")


class DriftReport(BaseModel):
    single_step_mae: float = Field(..., description="MAE of one canvas step from the reference states")
    composed_mae: float = Field(..., description="MAE after folding the canvas with pixel_max over the whole sequence")
    n_actions: int
    n_sequences: int

    @property
    def ratio(self) -> float:
        return self.composed_mae / self.single_step_mae if self.single_step_mae > 0 else float("inf")


class DrawerEval(BaseModel):
    canvas_sse: float = Field(..., description="Mean SSE of the canvas-network final state against the target")
    reference_sse: float = Field(..., description="Mean SSE after replaying the actions through the reference renderer")
    blank_sse: float = Field(..., description="Mean SSE of the initial canvas against the target")
    count: int = Field(..., ge=1)
    color_accuracy: Optional[float] = Field(None, description="Colored-MNIST nearest-palette color/label agreement")
    floorplan_iou: Optional[float] = Field(None, description="Mean per-class IoU of the rendered rect labels")


class ImageSkipStats(BaseModel):
    image: int = Field(..., ge=0, description="Index of the image in the corpus")
    sections: int = Field(..., ge=0)
    skipped: int = Field(..., ge=0)


class SlideTrainReport(BaseModel):
    crops_sampled: int
    crops_kept: int
    history: List[float] = Field(default_factory=list)
    skip_stats: List[ImageSkipStats] = Field(default_factory=list)


class SuiteRow(BaseModel):
    name: str
    seed: int
    canvas_sse: float
    reference_sse: float


class OrderingCheck(BaseModel):
    description: str
    passed: bool
    seeds_passed: int
    seeds_required: int


class SuiteResult(BaseModel):
    suite: str
    rows: List[SuiteRow] = Field(default_factory=list)
    checks: List[OrderingCheck] = Field(default_factory=list)
    config: Dict[str, str] = Field(default_factory=dict, description="Effective run config, as written next to the artifacts")

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)
