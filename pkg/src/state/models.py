from typing import Any, Dict, List, Optional, TypedDict


class TrainState(TypedDict):
    """Resumable training progress stored in a checkpoint's JSON sidecar."""

    kind: str
    completed_epochs: int
    history: List[float]
    parameter_checksum: str
    canvas_checksum: Optional[str]
    config: Dict[str, Any]


def initial_train_state(kind: str, config: Dict[str, Any], canvas_checksum: Optional[str] = None) -> TrainState:
    return TrainState(
        kind=kind,
        completed_epochs=0,
        history=[],
        parameter_checksum="",
        canvas_checksum=canvas_checksum,
        config=config,
    )
