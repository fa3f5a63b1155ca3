"""Network checkpoints: parameters and Adam moments in the binary container, spec and progress in a JSON sidecar."""

import json
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import structlog

from src.autodiff.optim import Adam
from src.canvas.network import CanvasNet, CanvasSpec
from src.drawer.network import DrawerNet, DrawerSpec
from src.errors import ArtifactError, MissingPrerequisiteError
from src.state.models import TrainState
from src.storage.checkpoints import load_checkpoint, save_checkpoint
from src.utils.json_saver import stable_json

logger = structlog.get_logger(__name__)

_PARAM_PREFIX = "param."


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".json")


def save_network(
    path: Union[str, Path],
    net: Union[CanvasNet, DrawerNet],
    state: TrainState,
    optimizer: Optional[Adam] = None,
) -> Path:
    path = Path(path)
    arrays: Dict[str, np.ndarray] = {_PARAM_PREFIX + k: v for k, v in net.state_dict().items()}
    if optimizer is not None:
        arrays.update(optimizer.state.to_arrays())
    save_checkpoint(path, arrays)
    state = TrainState(**{**state, "parameter_checksum": net.checksum()})
    sidecar = {"kind": state["kind"], "spec": net.spec.model_dump(mode="json"), "train_state": state}
    sidecar_path(path).write_text(stable_json(sidecar), encoding="utf-8")
    return path


def _load(path: Union[str, Path], kind: str) -> Tuple[dict, Dict[str, np.ndarray]]:
    path = Path(path)
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise MissingPrerequisiteError(meta_path, f"{kind} checkpoint metadata")
    arrays = load_checkpoint(path)
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("kind") != kind:
        raise ArtifactError(f"{path} holds a {meta.get('kind')} network, expected {kind}")
    return meta, arrays


def _params(arrays: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {k[len(_PARAM_PREFIX):]: v for k, v in arrays.items() if k.startswith(_PARAM_PREFIX)}


def load_canvas(path: Union[str, Path]) -> Tuple[CanvasNet, TrainState, Dict[str, np.ndarray]]:
    """Rebuild a canvas network (frozen if it was saved frozen).

    Returns:
        (network, training progress, raw container arrays for optimizer resume)
    """
    meta, arrays = _load(path, "canvas")
    spec = CanvasSpec(**meta["spec"])
    net = CanvasNet(spec.model_copy(update={"frozen": False}))
    net.load_state_dict(_params(arrays))
    if spec.frozen:
        net.freeze()
    return net, TrainState(**meta["train_state"]), arrays


def load_drawer(path: Union[str, Path]) -> Tuple[DrawerNet, TrainState, Dict[str, np.ndarray]]:
    meta, arrays = _load(path, "drawer")
    net = DrawerNet(DrawerSpec(**meta["spec"]))
    net.load_state_dict(_params(arrays))
    return net, TrainState(**meta["train_state"]), arrays


def restore_optimizer(optimizer: Adam, arrays: Dict[str, np.ndarray]) -> Adam:
    if "adam.step" in arrays:
        optimizer.state.load_arrays({k: v for k, v in arrays.items() if k.startswith("adam.")})
        logger.info(f"Restored optimizer state at step {optimizer.state.step}")
    return optimizer
