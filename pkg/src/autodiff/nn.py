"""Parameter containers shared by the canvas and drawer networks."""

from __future__ import annotations

import hashlib
from typing import Dict, Mapping, Tuple

import numpy as np

from src.autodiff.node import Node, Tensor, parameter
from src.autodiff.ops import LSTMWeights
from src.errors import ShapeError


def glorot_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)


class Module:
    """Named collection of trainable parameters."""

    def __init__(self):
        self._params: Dict[str, Node] = {}
        self.frozen = False

    def add_parameter(self, name: str, value: Tensor) -> Node:
        if name in self._params:
            raise ValueError(f"Duplicate parameter name: {name}")
        node = parameter(value, name)
        node.requires_grad = not self.frozen
        self._params[name] = node
        return node

    def dense_params(self, name: str, rng: np.random.Generator, n_in: int, n_out: int) -> Tuple[Node, Node]:
        weight = self.add_parameter(f"{name}.weight", glorot_uniform(rng, (n_in, n_out), n_in, n_out))
        bias = self.add_parameter(f"{name}.bias", np.zeros(n_out, dtype=np.float32))
        return weight, bias

    def conv_params(self, name: str, rng: np.random.Generator, c_in: int, c_out: int, k: int = 3) -> Tuple[Node, Node]:
        kernel = self.add_parameter(
            f"{name}.kernel", glorot_uniform(rng, (c_out, c_in, k, k), c_in * k * k, c_out * k * k)
        )
        bias = self.add_parameter(f"{name}.bias", np.zeros(c_out, dtype=np.float32))
        return kernel, bias

    def lstm_params(self, name: str, rng: np.random.Generator, n_in: int, hidden: int) -> LSTMWeights:
        return LSTMWeights(
            w_x=self.add_parameter(f"{name}.w_x", glorot_uniform(rng, (n_in, 4 * hidden), n_in, 4 * hidden)),
            w_h=self.add_parameter(f"{name}.w_h", glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden)),
            bias=self.add_parameter(f"{name}.bias", np.zeros(4 * hidden, dtype=np.float32)),
        )

    def parameters(self) -> Dict[str, Node]:
        return dict(self._params)

    def freeze(self) -> None:
        """Stop every parameter from accumulating gradients; gradients still pass through."""
        self.frozen = True
        for node in self._params.values():
            node.requires_grad = False
            node.zero_grad()

    def state_dict(self) -> Dict[str, Tensor]:
        return {name: node.value.copy() for name, node in self._params.items()}

    def load_state_dict(self, arrays: Mapping[str, Tensor]) -> None:
        missing = [name for name in self._params if name not in arrays]
        if missing:
            raise ShapeError(f"Checkpoint is missing parameters: {', '.join(missing)}")
        for name, node in self._params.items():
            value = np.asarray(arrays[name], dtype=np.float32)
            if value.shape != node.value.shape:
                raise ShapeError(f"Parameter {name}: checkpoint shape {value.shape} != model shape {node.value.shape}")
            node.value = value.copy()

    def checksum(self) -> str:
        return parameter_checksum(self._params)


def parameter_checksum(params: Mapping[str, Node]) -> str:
    """SHA-256 over parameter names, shapes and raw bytes."""
    digest = hashlib.sha256()
    for name in sorted(params):
        value = np.ascontiguousarray(params[name].value, dtype="<f4")
        digest.update(name.encode("utf-8"))
        digest.update(str(value.shape).encode("ascii"))
        digest.update(value.tobytes())
    return digest.hexdigest()
